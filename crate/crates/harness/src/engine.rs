use gfflab_core::overlay::{AllOpen, LazyOverlay};
use gfflab_core::percolation::{
    bulk_target_radius, chemical_distance_box_to_ring, circuit_dual, circuit_radii, reaches_ring,
    search, Mode,
};
use gfflab_core::rng::{spawn_replica_stream, RngStream};
use gfflab_core::sampler::{FieldSample, OriginConditioner, SamplerScratch, SpectralSampler};
use gfflab_core::{Annulus, Site};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{HarnessError, Result};

/// Replicas handed to the pool at a time; results come back in index order.
const BLOCK: u64 = 2048;

/// Outcome code for a chemical-distance probe whose conditioning event fails.
pub const NOT_CONNECTED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// `0 <-> ∂B_{floor(rN)}`.
    ArmBulk {
        r: f64,
    },
    /// `0 <-> ∂_i B_N`.
    ArmBoundary,
    /// `0 <-> ∂B_N`, the pinned ring.
    ArmPinned,
    Circuit {
        alpha: f64,
        beta: f64,
    },
    /// `D(B_{αN}, ∂B_{βN})` given `B_{αN} <-> ∂B_{γN}`.
    ChemDist {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
}

impl Event {
    pub fn name(&self) -> String {
        match self {
            Event::ArmBulk { r } => format!("arm_bulk_r{r}"),
            Event::ArmBoundary => "arm_boundary_inner".into(),
            Event::ArmPinned => "arm_boundary_outer".into(),
            Event::Circuit { alpha, beta } => format!("circuit_a{alpha}_b{beta}"),
            Event::ChemDist { alpha, beta, gamma } => {
                format!("chem_dist_a{alpha}_b{beta}_g{gamma}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub event: Event,
    pub h: f64,
    pub mode: Mode,
    /// Evaluated on the first `replicas` replicas of the pass.
    pub replicas: u64,
}

/// One sweep over replicas of a single box size: each replica draws one
/// field and evaluates every probe on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Pass {
    pub n: u32,
    pub seed: u64,
    pub kappa: f64,
    pub replica_start: u64,
    /// Origin value to condition on.
    pub condition: Option<f64>,
    pub probes: Vec<Probe>,
}

impl Pass {
    pub fn replicas(&self) -> u64 {
        self.probes.iter().map(|p| p.replicas).max().unwrap_or(0)
    }

    pub fn base_stream(&self) -> RngStream {
        base_stream(self.seed, self.n)
    }
}

/// Root stream of box size `n` under `seed`; replica `i` uses its `i`-th child.
pub fn base_stream(seed: u64, n: u32) -> RngStream {
    RngStream::new(seed, n as u64)
}

/// Per-probe outcomes in replica order: 0/1 for events, the distance or
/// [`NOT_CONNECTED`] for chemical distances.
#[derive(Debug, Clone, PartialEq)]
pub struct PassOutcome {
    pub outcomes: Vec<Vec<u32>>,
}

impl PassOutcome {
    pub fn successes(&self, probe: usize) -> u64 {
        self.outcomes[probe].iter().filter(|&&v| v == 1).count() as u64
    }
}

pub fn thread_pool(workers: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Other(format!("thread pool: {e}")))
}

/// Maps `f` over replica indices `start..start + count` in parallel and
/// returns the results in index order.
pub fn map_replicas<S, T, I, F>(pool: &ThreadPool, start: u64, count: u64, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64) -> T + Sync + Send,
{
    let mut out = Vec::with_capacity(count as usize);
    let mut lo = start;
    let end = start + count;
    while lo < end {
        let hi = (lo + BLOCK).min(end);
        let block: Vec<T> = pool.install(|| (lo..hi).into_par_iter().map_init(&init, &f).collect());
        out.extend(block);
        lo = hi;
    }
    out
}

struct Prepared {
    annuli: Vec<Option<Annulus>>,
    chem: Vec<Option<ChemGeometry>>,
}

struct ChemGeometry {
    inner: i32,
    ring: i32,
    far_ring: i32,
    sources: Vec<usize>,
}

fn prepare(pass: &Pass) -> Result<Prepared> {
    let n = pass.n;
    let bx = gfflab_core::BoxSpec::new(n);
    let mut annuli = Vec::new();
    let mut chem = Vec::new();
    for p in &pass.probes {
        let discrete_only = matches!(p.event, Event::Circuit { .. } | Event::ChemDist { .. });
        if discrete_only && p.mode != Mode::Discrete {
            return Err(HarnessError::Config(format!(
                "{} is evaluated in discrete mode only",
                p.event.name()
            )));
        }
        annuli.push(match p.event {
            Event::Circuit { alpha, beta } => {
                let (k, l) = circuit_radii(n, alpha, beta)?;
                Some(Annulus::new(k, l)?)
            }
            _ => None,
        });
        chem.push(match p.event {
            Event::ChemDist { alpha, beta, gamma } => {
                let inner = (alpha * n as f64).floor() as i32;
                let ring = (beta * n as f64).floor() as i32 + 1;
                let far_ring = (gamma * n as f64).floor() as i32 + 1;
                if inner < 1 || ring <= inner || far_ring < ring || far_ring > n as i32 {
                    return Err(HarnessError::Config(format!(
                        "chemical-distance radii degenerate for N = {n}"
                    )));
                }
                let sources = (-inner..=inner)
                    .flat_map(|y| (-inner..=inner).map(move |x| Site::new(x, y)))
                    .map(|s| bx.offset_unchecked(s))
                    .collect();
                Some(ChemGeometry {
                    inner,
                    ring,
                    far_ring,
                    sources,
                })
            }
            _ => None,
        });
    }
    Ok(Prepared { annuli, chem })
}

fn ring_of(side: i32, r: i32, o: usize) -> i32 {
    let (x, y) = ((o as i32 % side) - r, (o as i32 / side) - r);
    x.abs().max(y.abs())
}

fn arm(field: &FieldSample, probe: &Probe, stream: &RngStream, kappa: f64, radius: i32) -> bool {
    match probe.mode {
        Mode::Discrete => reaches_ring(field, probe.h, &mut AllOpen, radius),
        Mode::Metric => {
            let mut gate = LazyOverlay::new(field, probe.h, kappa, stream);
            reaches_ring(field, probe.h, &mut gate, radius)
        }
    }
}

fn evaluate(
    field: &FieldSample,
    pass: &Pass,
    prep: &Prepared,
    idx: usize,
    stream: &RngStream,
) -> u32 {
    let probe = &pass.probes[idx];
    let bx = field.box_spec();
    match probe.event {
        Event::ArmBulk { r } => arm(
            field,
            probe,
            stream,
            pass.kappa,
            bulk_target_radius(pass.n, r),
        ) as u32,
        Event::ArmBoundary => arm(field, probe, stream, pass.kappa, pass.n as i32) as u32,
        Event::ArmPinned => arm(field, probe, stream, pass.kappa, bx.radius()) as u32,
        Event::Circuit { .. } => {
            circuit_dual(field, probe.h, prep.annuli[idx].expect("prepared")) as u32
        }
        Event::ChemDist { .. } => {
            let g = prep.chem[idx].as_ref().expect("prepared");
            let (side, r) = (bx.side() as i32, bx.radius());
            let far = g.far_ring;
            if search(field, probe.h, &mut AllOpen, &g.sources, |o| {
                ring_of(side, r, o) == far
            })
            .is_none()
            {
                return NOT_CONNECTED;
            }
            chemical_distance_box_to_ring(field, probe.h, g.inner, g.ring)
                .distance
                .expect("connection to the far ring crosses the near ring")
        }
    }
}

pub fn run_pass(pass: &Pass, pool: &ThreadPool) -> Result<PassOutcome> {
    let prep = prepare(pass)?;
    let bx = gfflab_core::BoxSpec::new(pass.n);
    let sampler = SpectralSampler::new(bx);
    let conditioner = pass.condition.map(|_| OriginConditioner::new(&sampler));
    let base = pass.base_stream();
    let total = pass.replicas();
    let rows = map_replicas(
        pool,
        pass.replica_start,
        total,
        SamplerScratch::default,
        |scratch, i| {
            let stream = spawn_replica_stream(&base, i);
            let mut field = sampler.sample_with(&stream, scratch);
            if let (Some(v), Some(c)) = (pass.condition, conditioner.as_ref()) {
                field = c.condition(field, v);
            }
            let local = i - pass.replica_start;
            (0..pass.probes.len())
                .map(|k| {
                    if local < pass.probes[k].replicas {
                        evaluate(&field, pass, &prep, k, &stream)
                    } else {
                        0
                    }
                })
                .collect::<Vec<u32>>()
        },
    );
    let outcomes = (0..pass.probes.len())
        .map(|k| {
            rows.iter()
                .take(pass.probes[k].replicas as usize)
                .map(|row| row[k])
                .collect()
        })
        .collect();
    Ok(PassOutcome { outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pass() -> Pass {
        Pass {
            n: 12,
            seed: 5,
            kappa: 4.0,
            replica_start: 0,
            condition: None,
            probes: vec![
                Probe {
                    event: Event::ArmBulk { r: 0.5 },
                    h: 0.0,
                    mode: Mode::Discrete,
                    replicas: 300,
                },
                Probe {
                    event: Event::ArmBulk { r: 0.5 },
                    h: 0.0,
                    mode: Mode::Metric,
                    replicas: 200,
                },
                Probe {
                    event: Event::ChemDist {
                        alpha: 0.25,
                        beta: 0.5,
                        gamma: 0.75,
                    },
                    h: 0.0,
                    mode: Mode::Discrete,
                    replicas: 300,
                },
            ],
        }
    }

    #[test]
    fn outcomes_do_not_depend_on_worker_count() {
        let p = pass();
        let a = run_pass(&p, &thread_pool(1).unwrap()).unwrap();
        let b = run_pass(&p, &thread_pool(3).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outcomes[1].len(), 200);
        for (d, m) in a.outcomes[0].iter().zip(&a.outcomes[1]) {
            assert!(*m <= *d);
        }
    }

    #[test]
    fn replica_ranges_compose() {
        let mut p = pass();
        let whole = run_pass(&p, &thread_pool(1).unwrap()).unwrap();
        p.replica_start = 100;
        for q in &mut p.probes {
            q.replicas = 50;
        }
        let part = run_pass(&p, &thread_pool(2).unwrap()).unwrap();
        assert_eq!(part.outcomes[0][..], whole.outcomes[0][100..150]);
        assert_eq!(part.outcomes[2][..], whole.outcomes[2][100..150]);
    }

    #[test]
    fn chemical_distance_is_at_least_the_gap() {
        let p = pass();
        let out = run_pass(&p, &thread_pool(1).unwrap()).unwrap();
        let connected: Vec<u32> = out.outcomes[2]
            .iter()
            .copied()
            .filter(|&d| d != NOT_CONNECTED)
            .collect();
        assert!(!connected.is_empty());
        // From B_3 to the ring at radius 7.
        assert!(connected.iter().all(|&d| d >= 4));
    }

    #[test]
    fn metric_only_for_arm_events() {
        let mut p = pass();
        p.probes[2].mode = Mode::Metric;
        assert!(run_pass(&p, &thread_pool(1).unwrap()).is_err());
    }
}
