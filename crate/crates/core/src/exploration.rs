//! Breadth-first exploration of a discrete level-set cluster and its
//! exploration martingale.
//!
//! Starting from `V_0 = S`, each step reveals the neighbours of the current
//! open frontier: `A_k` (open) and `B_k` (closed), and `V_k` collects every
//! revealed site. The revealed set at step `k + 1` is a function of the
//! values seen up to step `k`, so `E[X_U | φ on V_k]` is a martingale in `k`.
//! It equals `sum_{x in V_k} φ_x H_N(U, x; V_k)`.

use crate::error::{Error, Result};
use crate::geometry::{BoxSpec, Site};
use crate::green::DirichletProblem;
use crate::percolation::nn_offsets;
use crate::sampler::FieldSample;

/// Target set `U` of the observable `X_U = sum_{x in U} φ_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    sites: Vec<Site>,
}

impl Observable {
    pub fn new(bx: &BoxSpec, mut sites: Vec<Site>) -> Result<Self> {
        sites.sort();
        sites.dedup();
        if sites.is_empty() {
            return Err(Error::Domain("observable needs at least one site".into()));
        }
        if let Some(s) = sites.iter().find(|s| !bx.is_interior(**s)) {
            return Err(Error::Domain(format!("observable site {s:?} not in B_N")));
        }
        Ok(Observable { sites })
    }

    /// `∂B_{floor(3N/4)}`.
    pub fn bulk(bx: &BoxSpec) -> Self {
        let r = (3 * bx.n() / 4) as i32;
        Observable {
            sites: BoxSpec::ring(r),
        }
    }

    /// `∂_i B_N`.
    pub fn boundary(bx: &BoxSpec) -> Self {
        Observable {
            sites: BoxSpec::ring(bx.n() as i32),
        }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `X_U`.
    pub fn value(&self, field: &FieldSample) -> f64 {
        self.sites.iter().map(|s| field.get(*s)).sum()
    }

    /// `X_U / |U|`.
    pub fn mean(&self, field: &FieldSample) -> f64 {
        self.value(field) / self.len() as f64
    }
}

/// Why the exploration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The open frontier emptied.
    Frozen,
    /// The explored set met the target ring.
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationTrace {
    bx: BoxSpec,
    h: f64,
    /// Sites in order of revelation; `V_k` is the prefix of length
    /// `explored[k]`.
    revealed: Vec<Site>,
    explored: Vec<usize>,
    open_frontier: Vec<Vec<Site>>,
    closed_frontier: Vec<Vec<Site>>,
    termination: Termination,
}

impl ExplorationTrace {
    pub fn box_spec(&self) -> BoxSpec {
        self.bx
    }

    pub fn level(&self) -> f64 {
        self.h
    }

    /// Index of the last recorded step.
    pub fn last_step(&self) -> usize {
        self.explored.len() - 1
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// `V_k`, clamped to the last recorded step.
    pub fn explored(&self, k: usize) -> &[Site] {
        &self.revealed[..self.explored[k.min(self.last_step())]]
    }

    /// `|V_k|` for every recorded step.
    pub fn explored_sizes(&self) -> &[usize] {
        &self.explored
    }

    /// `A_k`; empty past the last recorded step.
    pub fn open_frontier(&self, k: usize) -> &[Site] {
        self.open_frontier.get(k).map_or(&[], |v| v.as_slice())
    }

    /// `B_k`; empty past the last recorded step.
    pub fn closed_frontier(&self, k: usize) -> &[Site] {
        self.closed_frontier.get(k).map_or(&[], |v| v.as_slice())
    }

    /// Every site revealed by the time the trace stops.
    pub fn all_revealed(&self) -> &[Site] {
        &self.revealed
    }
}

/// Runs the exploration of `{φ >= h}` from `source`, stopping when the open
/// frontier empties or, if `target` is given, once `V_k` meets `∂B_target`.
pub fn explore(
    field: &FieldSample,
    h: f64,
    source: &[Site],
    target: Option<i32>,
) -> Result<ExplorationTrace> {
    let bx = field.box_spec();
    let side = bx.side();
    let values = field.values();
    let mut in_v = vec![false; bx.len()];
    let mut revealed = Vec::new();
    let mut a0 = Vec::new();
    let mut b0 = Vec::new();
    for s in source {
        if !bx.is_interior(*s) {
            return Err(Error::Domain(format!("source site {s:?} not in B_N")));
        }
        let o = bx.offset_unchecked(*s);
        if in_v[o] {
            continue;
        }
        in_v[o] = true;
        revealed.push(*s);
        if values[o] >= h {
            a0.push(*s);
        } else {
            b0.push(*s);
        }
    }
    if revealed.is_empty() {
        return Err(Error::Domain("empty exploration source".into()));
    }
    let hits = |sites: &[Site]| target.is_some_and(|t| sites.iter().any(|s| s.norm_inf() == t));
    let mut trace = ExplorationTrace {
        bx,
        h,
        explored: vec![revealed.len()],
        revealed,
        open_frontier: vec![a0],
        closed_frontier: vec![b0],
        termination: Termination::Frozen,
    };
    if hits(&trace.revealed) {
        trace.termination = Termination::Target;
        return Ok(trace);
    }
    // A_0 and B_0 lie inside V_0, so V_1 = V_0.
    trace.explored.push(trace.revealed.len());
    if trace.open_frontier[0].is_empty() {
        return Ok(trace);
    }
    let pinned = bx.radius();
    let mut nb = [0usize; 4];
    loop {
        // Step k reveals the neighbours of A_{k-1} outside V_k; then
        // V_{k+1} = V_k ∪ A_k ∪ B_k.
        let k = trace.open_frontier.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for s in &trace.open_frontier[k - 1] {
            let n = nn_offsets(side, bx.offset_unchecked(*s), &mut nb);
            for &w in &nb[..n] {
                if in_v[w] {
                    continue;
                }
                let ws = bx.site(w);
                if ws.norm_inf() == pinned {
                    continue;
                }
                in_v[w] = true;
                if values[w] >= h {
                    a.push(ws);
                } else {
                    b.push(ws);
                }
            }
        }
        let grown = a.len() + b.len();
        let frozen = a.is_empty();
        trace.revealed.extend(a.iter().chain(&b));
        let reached = hits(&trace.revealed[trace.revealed.len() - grown..]);
        trace.open_frontier.push(a);
        trace.closed_frontier.push(b);
        trace.explored.push(trace.revealed.len());
        if reached {
            trace.termination = Termination::Target;
            break;
        }
        if frozen {
            break;
        }
    }
    Ok(trace)
}

/// One step of the exploration martingale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingalePoint {
    pub step: usize,
    pub explored: usize,
    /// `M_k = E[X_U | φ on V_k]`.
    pub m: f64,
    /// `M_k / |U|`.
    pub m_bar: f64,
    /// `H̄_N(U, V_k)`.
    pub h_bar: f64,
}

/// Exploration-martingale path for the observable `u`, one point per
/// recorded step. The Dirichlet solves reuse the previous solution as the
/// starting guess.
pub fn martingale(
    field: &FieldSample,
    trace: &ExplorationTrace,
    u: &Observable,
) -> Result<Vec<MartingalePoint>> {
    let bx = trace.box_spec();
    let values = field.values();
    let sources: Vec<usize> = u.sites().iter().map(|s| bx.offset_unchecked(*s)).collect();
    let mut problem = DirichletProblem::new(bx, &[]);
    let mut g: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(trace.explored.len());
    let mut added = 0usize;
    let mut prev: Option<MartingalePoint> = None;
    for (k, &len) in trace.explored.iter().enumerate() {
        if len == added {
            if let Some(p) = prev {
                let p = MartingalePoint { step: k, ..p };
                out.push(p);
                prev = Some(p);
                continue;
            }
        }
        let new: Vec<usize> = trace.revealed[added..len]
            .iter()
            .map(|s| bx.offset_unchecked(*s))
            .collect();
        if let Some(s) = new.iter().find(|o| sources.contains(o)) {
            return Err(Error::Domain(format!(
                "observable site {:?} explored at step {k}",
                bx.site(*s)
            )));
        }
        problem.absorb(&new);
        added = len;
        let sol = problem.green_from(&sources, g.as_deref())?;
        let mass = problem.hitting_masses(&sources, &sol);
        let (mut m, mut h) = (0.0, 0.0);
        for s in &trace.revealed[..len] {
            let o = bx.offset_unchecked(*s);
            m += values[o] * mass[o];
            h += mass[o];
        }
        let n = u.len() as f64;
        let p = MartingalePoint {
            step: k,
            explored: len,
            m,
            m_bar: m / n,
            h_bar: h / n,
        };
        out.push(p);
        prev = Some(p);
        g = Some(sol);
    }
    Ok(out)
}

/// `M_k` for a single step.
pub fn martingale_step(
    field: &FieldSample,
    trace: &ExplorationTrace,
    u: &Observable,
    k: usize,
) -> Result<f64> {
    let bx = trace.box_spec();
    let v = trace.explored(k);
    let offsets: Vec<usize> = v.iter().map(|s| bx.offset_unchecked(*s)).collect();
    let sources: Vec<usize> = u.sites().iter().map(|s| bx.offset_unchecked(*s)).collect();
    if let Some(s) = u.sites().iter().find(|s| v.contains(s)) {
        return Err(Error::Domain(format!(
            "observable site {s:?} explored by step {k}"
        )));
    }
    let mut problem = DirichletProblem::new(bx, &[]);
    problem.absorb(&offsets);
    let g = problem.green_from(&sources, None)?;
    let mass = problem.hitting_masses(&sources, &g);
    Ok(offsets.iter().map(|&o| field.values()[o] * mass[o]).sum())
}

/// `H̄_N(U, I)`: average probability that the walk from `U` hits `I` before
/// the pinned ring.
pub fn average_harmonic_mass(bx: BoxSpec, u: &Observable, i: &[Site]) -> Result<f64> {
    let masses = harmonic_masses(bx, u.sites(), i)?;
    Ok(masses.iter().sum::<f64>() / u.len() as f64)
}

/// `H_N(U, x; I)` for each `x` of `I`, in the given order.
pub fn harmonic_masses(bx: BoxSpec, u: &[Site], i: &[Site]) -> Result<Vec<f64>> {
    let offsets: Vec<usize> = i
        .iter()
        .map(|s| {
            bx.offset(*s)
                .filter(|_| bx.is_interior(*s))
                .ok_or_else(|| Error::Domain(format!("site {s:?} not in B_N")))
        })
        .collect::<Result<_>>()?;
    let sources: Vec<usize> = u
        .iter()
        .map(|s| {
            bx.offset(*s)
                .ok_or_else(|| Error::Domain(format!("site {s:?} outside the box")))
        })
        .collect::<Result<_>>()?;
    let mut problem = DirichletProblem::new(bx, &[]);
    problem.absorb(&offsets);
    let g = problem.green_from(&sources, None)?;
    let mass = problem.hitting_masses(&sources, &g);
    let mut seen = vec![false; bx.len()];
    Ok(offsets
        .iter()
        .map(|&o| {
            if std::mem::replace(&mut seen[o], true) {
                0.0
            } else {
                mass[o]
            }
        })
        .collect())
}

/// `D(I)`: the sites of `I` charged by harmonic measure from `∂_i B_N`,
/// i.e. those a walk from `∂_i B_N` can reach while avoiding the rest of `I`.
pub fn harmonic_support(bx: BoxSpec, i: &[Site]) -> Vec<Site> {
    let n = bx.n() as i32;
    let mut in_i = vec![false; bx.len()];
    for s in i {
        if bx.is_interior(*s) {
            in_i[bx.offset_unchecked(*s)] = true;
        }
    }
    let mut reach = vec![false; bx.len()];
    let mut stack = Vec::new();
    for s in BoxSpec::ring(n) {
        let o = bx.offset_unchecked(s);
        if !in_i[o] {
            reach[o] = true;
            stack.push(o);
        }
    }
    let side = bx.side();
    let mut nb = [0usize; 4];
    while let Some(o) = stack.pop() {
        let k = nn_offsets(side, o, &mut nb);
        for &w in &nb[..k] {
            if reach[w] || in_i[w] || !bx.is_interior(bx.site(w)) {
                continue;
            }
            reach[w] = true;
            stack.push(w);
        }
    }
    let mut out: Vec<Site> = i
        .iter()
        .copied()
        .filter(|s| {
            bx.is_interior(*s) && {
                let o = bx.offset_unchecked(*s);
                s.norm_inf() == n || {
                    let k = nn_offsets(side, o, &mut nb);
                    nb[..k].iter().any(|&w| reach[w])
                }
            }
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// `ξ(U, I) = sup_{x in I \ D(I)} H_N(U, x; I \ D(I)) / H_N(U, I)`, zero
/// when `D(I) = I`.
pub fn xi_diagnostic(bx: BoxSpec, u: &Observable, i: &[Site]) -> Result<f64> {
    let support = harmonic_support(bx, i);
    let mut rest: Vec<Site> = i
        .iter()
        .copied()
        .filter(|s| support.binary_search(s).is_err())
        .collect();
    rest.sort();
    rest.dedup();
    if rest.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = harmonic_masses(bx, u.sites(), i)?.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain("U does not see I".into()));
    }
    let inner = harmonic_masses(bx, u.sites(), &rest)?;
    Ok(inner.iter().copied().fold(0.0, f64::max) / total)
}

/// `τ_r`: first step at which `V_k` meets `∂B_r`, `None` if never.
pub fn stopping_times(trace: &ExplorationTrace, radii: &[i32]) -> Vec<Option<usize>> {
    let mut first = vec![None; radii.len()];
    let mut k = 0;
    for (idx, s) in trace.revealed.iter().enumerate() {
        while trace.explored[k] <= idx {
            k += 1;
        }
        let r = s.norm_inf();
        for (slot, &rad) in first.iter_mut().zip(radii) {
            if slot.is_none() && r == rad {
                *slot = Some(k);
            }
        }
    }
    first
}

/// Flat export of a trace for offline analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub explored: usize,
    pub m_bar: f64,
    pub h_bar: f64,
}

pub fn trace_records(points: &[MartingalePoint]) -> Vec<TraceRecord> {
    points
        .iter()
        .map(|p| TraceRecord {
            step: p.step,
            explored: p.explored,
            m_bar: p.m_bar,
            h_bar: p.h_bar,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::GreenTable;
    use crate::percolation::{label_clusters, Mode};
    use crate::rng::RngStream;
    use crate::sampler::SpectralSampler;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn closed_source_freezes_immediately() {
        let bx = BoxSpec::new(8);
        let f = FieldSample::from_fn(bx, |_| -1.0);
        let t = explore(&f, 0.0, &[Site::ORIGIN], None).unwrap();
        assert!(t.open_frontier(0).is_empty());
        assert_eq!(t.closed_frontier(0), &[Site::ORIGIN]);
        assert_eq!(t.last_step(), 1);
        assert_eq!(t.explored(1), &[Site::ORIGIN]);
        assert_eq!(t.explored(7), t.explored(1));
        assert_eq!(t.termination(), Termination::Frozen);
    }

    #[test]
    fn open_box_grows_in_l1_layers() {
        let n = 6;
        let bx = BoxSpec::new(n);
        let f = FieldSample::from_fn(bx, |_| 1.0);
        let t = explore(&f, 0.0, &[Site::ORIGIN], Some(n as i32)).unwrap();
        for k in 1..=t.last_step() {
            let expect = bx
                .interior_sites()
                .filter(|s| s.x.abs() + s.y.abs() < k as i32)
                .count();
            assert_eq!(t.explored(k).len(), expect, "k = {k}");
        }
        assert_eq!(t.termination(), Termination::Target);
        assert_eq!(stopping_times(&t, &[n as i32])[0], Some(t.last_step()));
    }

    #[test]
    fn explored_set_is_cluster_plus_outer_shell() {
        let bx = BoxSpec::new(4);
        let s = SpectralSampler::new(bx);
        for rep in 0..40 {
            let f = s.sample(&RngStream::new(21, rep));
            let h = 0.1;
            let t = explore(&f, h, &[Site::ORIGIN], None).unwrap();
            let labels = label_clusters(&f, h, Mode::Discrete, None).unwrap();
            let id = labels.id(Site::ORIGIN);
            let mut expect: Vec<Site> = Vec::new();
            for x in bx.interior_sites() {
                let open_in = id != u32::MAX && labels.id(x) == id;
                let shell = id != u32::MAX
                    && f.get(x) < h
                    && x.neighbors()
                        .iter()
                        .any(|y| bx.is_interior(*y) && labels.id(*y) == id);
                if open_in || shell || x == Site::ORIGIN {
                    expect.push(x);
                }
            }
            let mut got = t.all_revealed().to_vec();
            got.sort();
            expect.sort();
            assert_eq!(got, expect, "rep {rep}");
        }
    }

    #[test]
    fn trace_invariants() {
        let bx = BoxSpec::new(16);
        let s = SpectralSampler::new(bx);
        for rep in 0..10 {
            let f = s.sample(&RngStream::new(22, rep));
            let t = explore(&f, -0.2, &[Site::ORIGIN], Some(8)).unwrap();
            for k in 1..=t.last_step() {
                let prev = t.explored(k - 1);
                for x in t.open_frontier(k).iter().chain(t.closed_frontier(k)) {
                    assert!(!prev.contains(x));
                }
                let mut union: Vec<Site> = prev
                    .iter()
                    .chain(t.open_frontier(k - 1))
                    .chain(t.closed_frontier(k - 1))
                    .copied()
                    .collect();
                union.sort();
                union.dedup();
                let mut vk = t.explored(k).to_vec();
                vk.sort();
                assert_eq!(vk, union);
            }
            let tau = stopping_times(&t, &[1, 3, 5, 8]);
            for w in tau.windows(2) {
                match (w[0], w[1]) {
                    (Some(a), Some(b)) => assert!(a <= b),
                    (None, Some(_)) => panic!("nesting violated"),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn first_step_is_point_mass() {
        let bx = BoxSpec::new(12);
        let f = SpectralSampler::new(bx).sample(&RngStream::new(5, 0));
        let u = Observable::bulk(&bx);
        let t = explore(&f, 0.0, &[Site::ORIGIN], Some(6)).unwrap();
        let m = martingale(&f, &t, &u).unwrap();
        let h0 = average_harmonic_mass(bx, &u, &[Site::ORIGIN]).unwrap();
        assert!((m[0].m_bar - f.get(Site::ORIGIN) * h0).abs() < 1e-12);
        assert!((m[0].h_bar - h0).abs() < 1e-12);
        for w in m.windows(2) {
            assert!(w[1].h_bar >= w[0].h_bar - 1e-12);
        }
    }

    #[test]
    fn frozen_trace_sits_below_the_level() {
        let bx = BoxSpec::new(16);
        let s = SpectralSampler::new(bx);
        let u = Observable::bulk(&bx);
        let mut checked = 0;
        for rep in 0..30 {
            let f = s.sample(&RngStream::new(23, rep));
            let h = 0.3;
            let t = explore(&f, h, &[Site::ORIGIN], Some(8)).unwrap();
            if t.termination() != Termination::Frozen {
                continue;
            }
            let m = martingale(&f, &t, &u).unwrap();
            let last = m.last().unwrap();
            assert!(last.m_bar < h * last.h_bar);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn martingale_matches_conditional_mean_from_green_table() {
        let bx = BoxSpec::new(16);
        let table = GreenTable::build_spectral(bx, usize::MAX).unwrap();
        let f = SpectralSampler::new(bx).sample(&RngStream::new(24, 3));
        let u = Observable::bulk(&bx);
        let t = explore(&f, -0.5, &[Site::ORIGIN], Some(8)).unwrap();
        let path = martingale(&f, &t, &u).unwrap();
        for k in [0, t.last_step() / 2, t.last_step()] {
            let v = t.explored(k);
            let gvv = DMatrix::from_fn(v.len(), v.len(), |i, j| table.get(v[i], v[j]));
            let phi = DVector::from_iterator(v.len(), v.iter().map(|s| f.get(*s)));
            let w = gvv.lu().solve(&phi).unwrap();
            let direct: f64 = u
                .sites()
                .iter()
                .map(|x| {
                    v.iter()
                        .zip(w.iter())
                        .map(|(y, c)| table.get(*x, *y) * c)
                        .sum::<f64>()
                })
                .sum();
            assert!(
                (path[k].m - direct).abs() < 1e-8,
                "k {k}: {} vs {direct}",
                path[k].m
            );
            let single = martingale_step(&f, &t, &u, k).unwrap();
            assert!((single - direct).abs() < 1e-8);
        }
    }

    #[test]
    fn observable_overlap_is_rejected() {
        let bx = BoxSpec::new(8);
        let f = FieldSample::from_fn(bx, |_| 1.0);
        let t = explore(&f, 0.0, &[Site::ORIGIN], None).unwrap();
        assert!(martingale(&f, &t, &Observable::bulk(&bx)).is_err());
    }

    #[test]
    fn harmonic_support_examples() {
        let bx = BoxSpec::new(10);
        assert_eq!(
            harmonic_support(bx, &[Site::new(2, 3)]),
            vec![Site::new(2, 3)]
        );
        let block: Vec<Site> = (-1..=1)
            .flat_map(|y| (-1..=1).map(move |x| Site::new(x, y)))
            .collect();
        let d = harmonic_support(bx, &block);
        assert_eq!(d.len(), 8);
        assert!(!d.contains(&Site::ORIGIN));
    }

    #[test]
    fn harmonic_support_matches_dirichlet_positivity() {
        let bx = BoxSpec::new(8);
        let s = SpectralSampler::new(bx);
        let boundary: Vec<Site> = BoxSpec::ring(8);
        for rep in 0..20 {
            let f = s.sample(&RngStream::new(25, rep));
            let t = explore(&f, -0.3, &[Site::ORIGIN], None).unwrap();
            let mut i = t.all_revealed().to_vec();
            i.retain(|s| s.norm_inf() < 8);
            let d = harmonic_support(bx, &i);
            let masses = harmonic_masses(bx, &boundary, &i).unwrap();
            for (x, m) in i.iter().zip(&masses) {
                assert_eq!(
                    d.binary_search(x).is_ok(),
                    *m > 1e-14,
                    "rep {rep} site {x:?} mass {m}"
                );
            }
        }
    }

    #[test]
    fn xi_examples() {
        let bx = BoxSpec::new(32);
        let u = Observable::bulk(&bx);
        assert_eq!(xi_diagnostic(bx, &u, &[Site::ORIGIN]).unwrap(), 0.0);
        let block = |r: i32| -> Vec<Site> {
            (-r..=r)
                .flat_map(|y| (-r..=r).map(move |x| Site::new(x, y)))
                .collect()
        };
        let xi2 = xi_diagnostic(bx, &u, &block(2)).unwrap();
        assert!(xi2 > 0.0 && xi2 < 1.0);
        let xi4 = xi_diagnostic(bx, &u, &block(4)).unwrap();
        let xi8 = xi_diagnostic(bx, &u, &block(8)).unwrap();
        assert!(xi4 < xi2 && xi8 < xi4, "{xi2} {xi4} {xi8}");
    }

    #[test]
    fn stopping_time_examples() {
        let bx = BoxSpec::new(8);
        let f = FieldSample::from_fn(bx, |s| if s.norm_inf() <= 2 { 1.0 } else { -1.0 });
        let t = explore(&f, 0.0, &[Site::new(2, 0)], None).unwrap();
        let tau = stopping_times(&t, &[2, 3, 5]);
        assert_eq!(tau[0], Some(0));
        assert!(tau[1].is_some());
        assert_eq!(tau[2], None);
    }
}
