use std::collections::HashSet;
use std::time::Instant;

use gfflab_core::analytics::{
    brownian_line_hitting_mc, default_steps, envelope, exact_connection_oracle, k_parameter, psi,
    xi_normalized, EnvelopeKind, EnvelopeParams, PsiParams,
};
use gfflab_core::exploration::{explore, martingale, stopping_times, Observable};
use gfflab_core::green::green_entry;
use gfflab_core::percolation::{circuit_radii, Mode};
use gfflab_core::rng::{spawn_replica_stream, RngStream};
use gfflab_core::sampler::{SamplerScratch, SpectralSampler};
use gfflab_core::{BoxSpec, Site};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{Experiment, ExperimentConfig, ModeSpec};
use crate::engine::{
    base_stream, map_replicas, run_pass, Event, Pass, PassOutcome, Probe, NOT_CONNECTED,
};
use crate::error::{HarnessError, Result};
use crate::record::{EstimateRecord, RecordMeta};

/// A resumable chunk of an experiment. Its records are written together.
pub struct Unit {
    pub label: String,
    /// `(N, h)` cells the unit reports on.
    pub cells: Vec<(u32, f64)>,
    /// Prefix shared by the event names of the unit's records.
    pub tag: String,
    kind: UnitKind,
}

enum UnitKind {
    Pass { pass: Pass },
    Martingale { n: u32, h: f64 },
    Psi,
}

pub fn modes(spec: ModeSpec) -> &'static [Mode] {
    match spec {
        ModeSpec::Discrete => &[Mode::Discrete],
        ModeSpec::Metric => &[Mode::Metric],
        ModeSpec::Coupled => &[Mode::Discrete, Mode::Metric],
    }
}

fn probe(event: Event, h: f64, mode: Mode, replicas: u64) -> Probe {
    Probe {
        event,
        h,
        mode,
        replicas,
    }
}

fn pass_for(cfg: &ExperimentConfig, n: u32, condition: Option<f64>, probes: Vec<Probe>) -> Pass {
    Pass {
        n,
        seed: cfg.seed,
        kappa: cfg.kappa,
        replica_start: cfg.replica_start,
        condition,
        probes,
    }
}

/// `φ_0 = h + x sqrt(log N)`.
pub fn conditioning_value(h: f64, x: f64, n: u32) -> f64 {
    h + x * (n as f64).ln().sqrt()
}

pub fn plan(cfg: &ExperimentConfig, exp: Experiment) -> Vec<Unit> {
    let reps = cfg.replicas;
    let cells = |n: u32| cfg.h.iter().map(|&h| (n, h)).collect::<Vec<_>>();
    let mut units = Vec::new();
    match exp {
        Experiment::OneArmBulk | Experiment::Gap => {
            let ms = if exp == Experiment::Gap {
                modes(ModeSpec::Coupled)
            } else {
                modes(cfg.mode)
            };
            for &n in &cfg.n {
                let probes = cfg
                    .h
                    .iter()
                    .flat_map(|&h| {
                        ms.iter()
                            .map(move |&m| probe(Event::ArmBulk { r: cfg.r }, h, m, reps))
                    })
                    .collect();
                units.push(Unit {
                    label: format!("N={n}"),
                    cells: cells(n),
                    tag: String::new(),
                    kind: UnitKind::Pass {
                        pass: pass_for(cfg, n, None, probes),
                    },
                });
            }
        }
        Experiment::OneArmBoundary => {
            for &n in &cfg.n {
                let probes = cfg
                    .h
                    .iter()
                    .flat_map(|&h| {
                        modes(cfg.mode).iter().flat_map(move |&m| {
                            [Event::ArmBoundary, Event::ArmPinned].map(|e| probe(e, h, m, reps))
                        })
                    })
                    .collect();
                units.push(Unit {
                    label: format!("N={n}"),
                    cells: cells(n),
                    tag: "arm_boundary".into(),
                    kind: UnitKind::Pass {
                        pass: pass_for(cfg, n, None, probes),
                    },
                });
            }
        }
        Experiment::Circuit | Experiment::ChemDist => {
            let event = if exp == Experiment::Circuit {
                Event::Circuit {
                    alpha: cfg.alpha,
                    beta: cfg.beta,
                }
            } else {
                Event::ChemDist {
                    alpha: cfg.alpha,
                    beta: cfg.beta,
                    gamma: cfg.gamma,
                }
            };
            for &n in &cfg.n {
                let probes = cfg
                    .h
                    .iter()
                    .map(|&h| probe(event, h, Mode::Discrete, reps))
                    .collect();
                units.push(Unit {
                    label: format!("N={n}"),
                    cells: cells(n),
                    tag: if exp == Experiment::Circuit {
                        "circuit"
                    } else {
                        "chem_dist"
                    }
                    .into(),
                    kind: UnitKind::Pass {
                        pass: pass_for(cfg, n, None, probes),
                    },
                });
            }
        }
        Experiment::ConditionalArm => {
            for &n in &cfg.n {
                for &h in &cfg.h {
                    for &x in &cfg.x {
                        let probes = modes(cfg.mode)
                            .iter()
                            .map(|&m| probe(Event::ArmBulk { r: cfg.r }, h, m, reps))
                            .collect();
                        units.push(Unit {
                            label: format!("N={n} h={h} x={x}"),
                            cells: vec![(n, h)],
                            tag: cond_tag(x),
                            kind: UnitKind::Pass {
                                pass: pass_for(cfg, n, Some(conditioning_value(h, x, n)), probes),
                            },
                        });
                    }
                }
            }
        }
        Experiment::MartingaleAudit => {
            for &n in &cfg.n {
                for &h in &cfg.h {
                    units.push(Unit {
                        label: format!("N={n} h={h}"),
                        cells: vec![(n, h)],
                        tag: "mart_".into(),
                        kind: UnitKind::Martingale { n, h },
                    });
                }
            }
        }
        Experiment::PsiAudit => units.push(Unit {
            label: "psi grid".into(),
            cells: vec![(0, 0.0)],
            tag: "psi_".into(),
            kind: UnitKind::Psi,
        }),
    }
    units
}

fn cond_tag(x: f64) -> String {
    format!("cond_x{x}_")
}

impl Unit {
    /// True if `existing` already holds a record for every cell of the unit.
    pub fn is_done(
        &self,
        exp: Experiment,
        cfg: &ExperimentConfig,
        existing: &[EstimateRecord],
    ) -> bool {
        self.cells.iter().all(|&(n, h)| {
            existing.iter().any(|r| {
                r.experiment == exp.name()
                    && r.n == n
                    && r.h.to_bits() == h.to_bits()
                    && r.seed == cfg.seed
                    && r.replica_start == cfg.replica_start
                    && r.event.starts_with(&self.tag)
            })
        })
    }

    pub fn run(
        &self,
        exp: Experiment,
        cfg: &ExperimentConfig,
        pool: &ThreadPool,
    ) -> Result<Vec<EstimateRecord>> {
        match &self.kind {
            UnitKind::Pass { pass } => {
                let out = run_pass(pass, pool)?;
                pass_records(exp, cfg, pass, &out)
            }
            UnitKind::Martingale { n, h } => martingale_audit(cfg, *n, *h, pool),
            UnitKind::Psi => Ok(psi_audit(cfg, pool)),
        }
    }
}

fn meta<'a>(exp: Experiment, cfg: &'a ExperimentConfig, n: u32, seed: u64) -> RecordMeta<'a> {
    RecordMeta {
        experiment: exp.name(),
        n,
        seed,
        replica_start: cfg.replica_start,
        replica_end: cfg.replica_start + cfg.replicas,
        config: cfg,
    }
}

fn log_n(n: u32) -> f64 {
    (n as f64).ln()
}

/// Turns pass outcomes into records according to the experiment.
pub fn pass_records(
    exp: Experiment,
    cfg: &ExperimentConfig,
    pass: &Pass,
    out: &PassOutcome,
) -> Result<Vec<EstimateRecord>> {
    let m = meta(exp, cfg, pass.n, pass.seed);
    let mut recs = Vec::new();
    let find = |h: f64, mode: Mode| {
        pass.probes
            .iter()
            .position(|p| p.h.to_bits() == h.to_bits() && p.mode == mode)
    };
    match exp {
        Experiment::OneArmBulk | Experiment::Gap | Experiment::ConditionalArm => {
            let cond = pass.condition;
            for (i, p) in pass.probes.iter().enumerate() {
                let mut r = EstimateRecord::new(
                    &m,
                    event_name(exp, p, cond, cfg, pass.n),
                    p.h,
                    &p.mode.to_string(),
                    out.successes(i),
                    p.replicas,
                )
                .extra("sqrt_log_n", log_n(pass.n).sqrt());
                if let Some(v) = cond {
                    r = conditional_extras(r, cfg, pass.n, p.h, v);
                }
                recs.push(r);
            }
            for &h in &cfg.h {
                if cond.is_some() && pass.probes.iter().all(|p| p.h.to_bits() != h.to_bits()) {
                    continue;
                }
                let (Some(d), Some(mt)) = (find(h, Mode::Discrete), find(h, Mode::Metric)) else {
                    continue;
                };
                recs.extend(coupled_records(exp, &m, pass, out, d, mt, cond, cfg));
            }
        }
        Experiment::OneArmBoundary => {
            let g00 = green_entry(BoxSpec::new(pass.n), Site::ORIGIN, Site::ORIGIN);
            for (i, p) in pass.probes.iter().enumerate() {
                let mut r = EstimateRecord::new(
                    &m,
                    p.event.name(),
                    p.h,
                    &p.mode.to_string(),
                    out.successes(i),
                    p.replicas,
                )
                .extra("green_origin", g00);
                if p.h < 0.0 {
                    let oracle = exact_connection_oracle(p.h, g00)?;
                    let z = if r.se > 0.0 {
                        (r.p_hat - oracle) / r.se
                    } else {
                        f64::NAN
                    };
                    r = r.extra("oracle", oracle).extra("oracle_z", z);
                }
                recs.push(r);
            }
        }
        Experiment::Circuit => {
            let (k, l) = circuit_radii(pass.n, cfg.alpha, cfg.beta)?;
            for (i, p) in pass.probes.iter().enumerate() {
                recs.push(
                    EstimateRecord::new(
                        &m,
                        p.event.name(),
                        p.h,
                        "discrete",
                        out.successes(i),
                        p.replicas,
                    )
                    .extra("alpha", cfg.alpha)
                    .extra("beta", cfg.beta)
                    .extra("inner_radius", k as f64)
                    .extra("outer_radius", l as f64),
                );
            }
        }
        Experiment::ChemDist => {
            for (i, p) in pass.probes.iter().enumerate() {
                recs.extend(chem_records(&m, cfg, pass.n, p, &out.outcomes[i]));
            }
        }
        Experiment::MartingaleAudit | Experiment::PsiAudit => {
            return Err(HarnessError::Other(format!("{exp} does not run as a pass")));
        }
    }
    Ok(recs)
}

fn event_name(
    exp: Experiment,
    p: &Probe,
    cond: Option<f64>,
    cfg: &ExperimentConfig,
    n: u32,
) -> String {
    match (exp, cond) {
        (Experiment::ConditionalArm, Some(v)) => {
            let x = cfg
                .x
                .iter()
                .copied()
                .find(|&x| conditioning_value(p.h, x, n).to_bits() == v.to_bits())
                .unwrap_or(f64::NAN);
            format!("{}{}", cond_tag(x), p.event.name())
        }
        _ => p.event.name(),
    }
}

fn conditional_extras(
    mut r: EstimateRecord,
    cfg: &ExperimentConfig,
    n: u32,
    h: f64,
    v: f64,
) -> EstimateRecord {
    let x = xi_normalized(v, h, n as f64);
    r = r
        .extra("x", x)
        .extra("phi0", v)
        .extra("k_param", k_parameter(h, cfg.r));
    let p = EnvelopeParams {
        h,
        n: n as f64,
        r: cfg.r,
        x,
        ..EnvelopeParams::default()
    };
    if let Ok(lo) = envelope(EnvelopeKind::GLower, &p) {
        r = r.extra("g_lower", lo);
    }
    if let Ok(hi) = envelope(EnvelopeKind::GUpper, &p) {
        r = r.extra("g_upper", hi);
    }
    r
}

#[allow(clippy::too_many_arguments)]
fn coupled_records(
    exp: Experiment,
    m: &RecordMeta<'_>,
    pass: &Pass,
    out: &PassOutcome,
    d: usize,
    mt: usize,
    cond: Option<f64>,
    cfg: &ExperimentConfig,
) -> Vec<EstimateRecord> {
    let pd = &pass.probes[d];
    let n = pd.replicas.min(pass.probes[mt].replicas);
    let (dv, mv) = (
        &out.outcomes[d][..n as usize],
        &out.outcomes[mt][..n as usize],
    );
    let both = |a: u32, b: u32| {
        dv.iter()
            .zip(mv)
            .filter(|(x, y)| **x == a && **y == b)
            .count() as u64
    };
    let violations = both(0, 1);
    let disc_only = both(1, 0);
    let prefix = match cond {
        Some(_) => {
            let name = event_name(exp, pd, cond, cfg, pass.n);
            name[..name.len() - pd.event.name().len()].to_string()
        }
        None => String::new(),
    };
    let mut recs = vec![EstimateRecord::new(
        m,
        format!("{prefix}coupling_violation_{}", pd.event.name()),
        pd.h,
        "coupled",
        violations,
        n,
    )
    .extra("discrete_only", disc_only as f64)];
    if exp == Experiment::Gap {
        let nf = n as f64;
        let s_d = dv.iter().filter(|&&v| v == 1).count() as f64;
        let s_m = mv.iter().filter(|&&v| v == 1).count() as f64;
        let (p_d, p_m) = (s_d / nf, s_m / nf);
        let diff = p_d - p_m;
        // Paired variance of the per-replica difference `1_d - 1_m`.
        let e_sq = (disc_only + violations) as f64 / nf;
        let se_paired = ((e_sq - diff * diff).max(0.0) / nf).sqrt();
        let pooled = (p_d * (1.0 - p_d) / nf + p_m * (1.0 - p_m) / nf).sqrt();
        let ln = log_n(pass.n);
        recs.push(
            EstimateRecord::new(
                m,
                format!("gap_{}", pd.event.name()),
                pd.h,
                "coupled",
                disc_only,
                n,
            )
            .extra("p_disc", p_d)
            .extra("p_metric", p_m)
            .extra("diff", diff)
            .extra("se_paired", se_paired)
            .extra("pooled_se", pooled)
            .extra(
                "z_pooled",
                if pooled > 0.0 {
                    diff / pooled
                } else {
                    f64::NAN
                },
            )
            .extra("normalized_gap", diff * ln.sqrt())
            .extra("violations", violations as f64),
        );
    }
    recs
}

/// Scale `N (log N)^{1/4}` of the chemical-distance bound.
pub fn chem_scale(n: u32) -> f64 {
    n as f64 * log_n(n).powf(0.25)
}

/// Quantile level used to report the witness constant `c`.
pub const CHEM_QUANTILE: f64 = 0.8;

/// Smallest `c` among the observed ratios with `#{ratio > c} <= (1 - q) m`.
pub fn chem_witness(ratios: &mut [f64]) -> Option<f64> {
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len();
    let idx = ((CHEM_QUANTILE * m as f64).ceil() as usize).clamp(1, m) - 1;
    Some(ratios[idx])
}

fn chem_records(
    m: &RecordMeta<'_>,
    cfg: &ExperimentConfig,
    n: u32,
    p: &Probe,
    outcomes: &[u32],
) -> Vec<EstimateRecord> {
    let dists: Vec<u32> = outcomes
        .iter()
        .copied()
        .filter(|&d| d != NOT_CONNECTED)
        .collect();
    let total = outcomes.len() as u64;
    let conditioned = dists.len() as u64;
    let name = p.event.name();
    let base = |r: EstimateRecord| {
        r.extra("alpha", cfg.alpha)
            .extra("beta", cfg.beta)
            .extra("gamma", cfg.gamma)
    };
    let mut recs = vec![base(EstimateRecord::new(
        m,
        format!("{name}_connected"),
        p.h,
        "discrete",
        conditioned,
        total,
    ))];
    let scale = chem_scale(n);
    let mut ratios: Vec<f64> = dists.iter().map(|&d| d as f64 / scale).collect();
    let mut r = match chem_witness(&mut ratios) {
        Some(c) => {
            let exceed = ratios.iter().filter(|&&x| x > c).count() as u64;
            let mut sorted = dists.clone();
            sorted.sort_unstable();
            EstimateRecord::new(
                m,
                format!("{name}_exceeds"),
                p.h,
                "discrete",
                exceed,
                conditioned,
            )
            .extra("c_star", c)
            .extra("d_min", sorted[0] as f64)
            .extra("d_median", sorted[sorted.len() / 2] as f64)
            .extra("d_max", sorted[sorted.len() - 1] as f64)
            .extra(
                "d_mean",
                sorted.iter().map(|&d| d as f64).sum::<f64>() / sorted.len() as f64,
            )
        }
        None => EstimateRecord::new(m, format!("{name}_exceeds"), p.h, "discrete", 0, 0),
    };
    r = base(r)
        .extra("scale", scale)
        .extra("quantile", CHEM_QUANTILE);
    recs.push(r);
    recs
}

/// Per-replica summary of one exploration-martingale run.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRun {
    /// `M̄_k - M̄_{k-1}` for `k = 1..`.
    pub dm: Vec<f64>,
    /// `H̄_k - H̄_{k-1}`.
    pub dh: Vec<f64>,
    /// First step at which each audit radius is met.
    pub tau: Vec<Option<usize>>,
    pub m0: f64,
    pub m_end: f64,
    pub reached: bool,
}

/// Rings `∂B_r` for `r = 2, 4, ...` up to `N / 2`, as ring radii.
pub fn audit_radii(n: u32) -> Vec<i32> {
    let half = (n / 2) as i32;
    let mut out = Vec::new();
    let mut r = 2;
    while r < half {
        out.push(r + 1);
        r *= 2;
    }
    out.push(half + 1);
    out
}

pub fn martingale_run(
    field: &gfflab_core::sampler::FieldSample,
    h: f64,
    radii: &[i32],
) -> Result<MartingaleRun> {
    let bx = field.box_spec();
    let target = *radii.last().expect("at least one radius");
    let trace = explore(field, h, &[Site::ORIGIN], Some(target))?;
    let u = Observable::bulk(&bx);
    let pts = martingale(field, &trace, &u)?;
    let dm = pts.windows(2).map(|w| w[1].m_bar - w[0].m_bar).collect();
    let dh = pts.windows(2).map(|w| w[1].h_bar - w[0].h_bar).collect();
    let tau = stopping_times(&trace, radii);
    Ok(MartingaleRun {
        dm,
        dh,
        reached: tau.last().copied().flatten().is_some(),
        tau,
        m0: pts[0].m_bar,
        m_end: pts.last().expect("non-empty").m_bar,
    })
}

/// Aggregates over replicas of one seed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MartingaleStats {
    pub replicas: u64,
    /// Per step `k >= 1`: (active count, sum ΔM̄, sum ΔM̄², sum ΔH̄).
    pub steps: Vec<(u64, f64, f64, f64)>,
    /// Per layer: (sum ΔM̄², sum ΔH̄, replicas reaching the layer's outer radius).
    pub layers: Vec<(f64, f64, u64)>,
    pub stop_sum: f64,
    pub stop_sq: f64,
    pub reached: u64,
}

impl MartingaleStats {
    pub fn from_runs(runs: &[MartingaleRun], layers: usize) -> Self {
        let mut st = MartingaleStats {
            replicas: runs.len() as u64,
            layers: vec![(0.0, 0.0, 0); layers],
            ..Default::default()
        };
        for run in runs {
            if st.steps.len() < run.dm.len() {
                st.steps.resize(run.dm.len(), (0, 0.0, 0.0, 0.0));
            }
            for (k, (&dm, &dh)) in run.dm.iter().zip(&run.dh).enumerate() {
                let s = &mut st.steps[k];
                s.0 += 1;
                s.1 += dm;
                s.2 += dm * dm;
                s.3 += dh;
                // Increment k + 1 belongs to layer j if tau_{j-1} < k + 1 <= tau_j.
                let step = k + 1;
                let j = run
                    .tau
                    .iter()
                    .position(|t| t.is_none_or(|t| step <= t))
                    .unwrap_or(layers - 1);
                st.layers[j].0 += dm * dm;
                st.layers[j].1 += dh;
            }
            for (j, t) in run.tau.iter().enumerate() {
                st.layers[j].2 += t.is_some() as u64;
            }
            let d = run.m_end - run.m0;
            st.stop_sum += d;
            st.stop_sq += d * d;
            st.reached += run.reached as u64;
        }
        st
    }

    /// `Σ ΔM̄² / Σ ΔH̄` per layer, `None` where nothing was revealed.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.layers
            .iter()
            .map(|&(q, dh, _)| (dh > 0.0 && q > 0.0).then(|| q / dh))
            .collect()
    }
}

/// Bracket constant from a reference set of layer ratios: 1.5 times the
/// largest `max(r, 1/r)`.
pub fn bracket_constant(ratios: &[Option<f64>]) -> f64 {
    1.5 * ratios
        .iter()
        .flatten()
        .map(|&r| r.max(1.0 / r))
        .fold(1.0, f64::max)
}

pub fn bracket_holds(ratios: &[Option<f64>], c: f64) -> bool {
    ratios.iter().flatten().all(|&r| r >= 1.0 / c && r <= c)
}

/// Runs the exploration martingale on `replicas` fields of box size `n`.
pub fn martingale_sweep(
    n: u32,
    h: f64,
    seed: u64,
    start: u64,
    replicas: u64,
    pool: &ThreadPool,
) -> Result<Vec<MartingaleRun>> {
    let bx = BoxSpec::new(n);
    let sampler = SpectralSampler::new(bx);
    let base = base_stream(seed, n);
    let radii = audit_radii(n);
    map_replicas(
        pool,
        start,
        replicas,
        SamplerScratch::default,
        |scratch, i| {
            let field = sampler.sample_with(&spawn_replica_stream(&base, i), scratch);
            martingale_run(&field, h, &radii)
        },
    )
    .into_iter()
    .collect()
}

fn martingale_audit(
    cfg: &ExperimentConfig,
    n: u32,
    h: f64,
    pool: &ThreadPool,
) -> Result<Vec<EstimateRecord>> {
    let exp = Experiment::MartingaleAudit;
    let radii = audit_radii(n);
    let mut recs = Vec::new();
    let mut all_ratios = Vec::new();
    for s in 0..cfg.audit_seeds as u64 {
        let seed = cfg.seed + s;
        let m = meta(exp, cfg, n, seed);
        let runs = martingale_sweep(n, h, seed, cfg.replica_start, cfg.replicas, pool)?;
        let st = MartingaleStats::from_runs(&runs, radii.len());
        let total = st.replicas;
        for (k, &(active, sum, sq, dh)) in st.steps.iter().enumerate() {
            let a = active as f64;
            let mean = sum / a;
            let var = if active > 1 {
                (sq - a * mean * mean) / (a - 1.0)
            } else {
                0.0
            };
            let se = (var.max(0.0) / a).sqrt();
            recs.push(
                EstimateRecord::new(
                    &m,
                    format!("mart_step_{:03}", k + 1),
                    h,
                    "discrete",
                    active,
                    total,
                )
                .extra("mean", mean)
                .extra("se", se)
                .extra("z", if se > 0.0 { mean / se } else { 0.0 })
                .extra("mean_sq", sq / a)
                .extra("mean_dh", dh / a),
            );
        }
        let ratios = st.ratios();
        let mut lo = 0;
        for (j, &hi) in radii.iter().enumerate() {
            let (q, dh, reached) = st.layers[j];
            let mut r = EstimateRecord::new(
                &m,
                format!("mart_layer_{lo:03}_{hi:03}"),
                h,
                "discrete",
                reached,
                total,
            )
            .extra("sum_sq_mean", q / total as f64)
            .extra("sum_dh_mean", dh / total as f64);
            if let Some(x) = ratios[j] {
                r = r.extra("ratio", x);
            }
            recs.push(r);
            lo = hi;
        }
        let t = total as f64;
        let mean = st.stop_sum / t;
        let se = ((st.stop_sq / t - mean * mean).max(0.0) / t).sqrt();
        recs.push(
            EstimateRecord::new(
                &m,
                "mart_optional_stopping",
                h,
                "discrete",
                st.reached,
                total,
            )
            .extra("mean_diff", mean)
            .extra("se", se)
            .extra("z", if se > 0.0 { mean / se } else { 0.0 }),
        );
        all_ratios.push(ratios);
    }
    let c = bracket_constant(&all_ratios[0]);
    let fresh = &all_ratios[1..];
    let holds = fresh.iter().filter(|r| bracket_holds(r, c)).count() as u64;
    recs.push(
        EstimateRecord::new(
            &meta(exp, cfg, n, cfg.seed),
            "mart_bracket",
            h,
            "discrete",
            holds,
            fresh.len() as u64,
        )
        .extra("c_bracket", c),
    );
    Ok(recs)
}

/// The ψ audit grid `m ∈ {-1, 0, 1}`, `b ∈ {1/2, 1}`, `T ∈ {1, 4}`.
pub fn psi_grid() -> Vec<PsiParams> {
    let mut out = Vec::new();
    for m in [-1.0, 0.0, 1.0] {
        for b in [0.5, 1.0] {
            for t in [1.0, 4.0] {
                out.push(PsiParams::new(m, b, t).expect("grid points are valid"));
            }
        }
    }
    out
}

fn psi_audit(cfg: &ExperimentConfig, pool: &ThreadPool) -> Vec<EstimateRecord> {
    let grid = psi_grid();
    let m = meta(Experiment::PsiAudit, cfg, 0, cfg.seed);
    let estimates: Vec<_> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, p)| {
                let steps = default_steps(p.t);
                (
                    steps,
                    brownian_line_hitting_mc(
                        *p,
                        steps,
                        cfg.replicas,
                        &RngStream::new(cfg.seed, i as u64),
                    ),
                )
            })
            .collect()
    });
    grid.iter()
        .zip(estimates)
        .map(|(p, (steps, est))| {
            let exact = psi(*p);
            let z = if est.se > 0.0 {
                (est.p - exact) / est.se
            } else {
                0.0
            };
            EstimateRecord::new(
                &m,
                format!("psi_m{}_b{}_t{}", p.m, p.b, p.t),
                0.0,
                "brownian",
                est.successes,
                est.replicas,
            )
            .extra("m", p.m)
            .extra("b", p.b)
            .extra("t", p.t)
            .extra("psi", exact)
            .extra("z", z)
            .extra("steps", steps as f64)
        })
        .collect()
}

/// Runs every unit and returns all records in plan order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    exp: Experiment,
    pool: &ThreadPool,
) -> Result<Vec<EstimateRecord>> {
    cfg.validate(exp)?;
    let mut out = Vec::new();
    for unit in plan(cfg, exp) {
        out.extend(unit.run(exp, cfg, pool)?);
    }
    Ok(out)
}

/// Runs the units missing from `existing`, calling `emit` with each unit's
/// new records and wall time.
pub fn resume_experiment(
    cfg: &ExperimentConfig,
    exp: Experiment,
    pool: &ThreadPool,
    existing: &[EstimateRecord],
    mut emit: impl FnMut(&Unit, Vec<EstimateRecord>, f64) -> Result<()>,
) -> Result<()> {
    cfg.validate(exp)?;
    let have: HashSet<_> = existing.iter().map(|r| r.key()).collect();
    for unit in plan(cfg, exp) {
        if unit.is_done(exp, cfg, existing) {
            continue;
        }
        let t0 = Instant::now();
        let recs = unit.run(exp, cfg, pool)?;
        let fresh = recs
            .into_iter()
            .filter(|r| !have.contains(&r.key()))
            .collect();
        emit(&unit, fresh, t0.elapsed().as_secs_f64())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::thread_pool;

    #[test]
    fn witness_is_the_quantile() {
        let mut r: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let c = chem_witness(&mut r).unwrap();
        assert_eq!(c, 8.0);
        assert_eq!(r.iter().filter(|&&x| x > c).count(), 2);
        assert!(chem_witness(&mut []).is_none());
    }

    #[test]
    fn audit_radii_double() {
        assert_eq!(audit_radii(32), vec![3, 5, 9, 17]);
        assert_eq!(audit_radii(8), vec![3, 5]);
    }

    #[test]
    fn bracket_rule() {
        let r = [Some(2.0), Some(0.8), None];
        let c = bracket_constant(&r);
        assert_eq!(c, 3.0);
        assert!(bracket_holds(&[Some(2.9), Some(0.34)], c));
        assert!(!bracket_holds(&[Some(3.1)], c));
    }

    #[test]
    fn martingale_increments_are_recorded_per_step() {
        let pool = thread_pool(1).unwrap();
        let runs = martingale_sweep(12, 0.0, 1, 0, 20, &pool).unwrap();
        let st = MartingaleStats::from_runs(&runs, audit_radii(12).len());
        assert_eq!(st.replicas, 20);
        assert_eq!(st.steps[0].0, 20);
        for run in &runs {
            assert_eq!(run.dm.len(), run.dh.len());
            assert!(run.dh.iter().all(|&d| d >= -1e-12));
            let total: f64 = run.dm.iter().sum();
            assert!((total - (run.m_end - run.m0)).abs() < 1e-9);
        }
    }

    #[test]
    fn plan_shares_one_pass_per_box() {
        let mut cfg = ExperimentConfig::new(Experiment::OneArmBulk, 10);
        cfg.n = vec![16, 32];
        cfg.h = vec![0.0, -0.5];
        cfg.mode = ModeSpec::Coupled;
        let units = plan(&cfg, Experiment::OneArmBulk);
        assert_eq!(units.len(), 2);
        match &units[0].kind {
            UnitKind::Pass { pass } => assert_eq!(pass.probes.len(), 4),
            _ => panic!(),
        }
    }
}
