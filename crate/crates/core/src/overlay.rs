//! Metric-graph connectivity on top of a vertex sample.
//!
//! Given the vertex values, the field on an edge is an independent Brownian
//! bridge. For endpoints `a, b >= h` the bridge stays above `h` with
//! probability `1 - exp(-2 (a - h)(b - h) / kappa)`, where `kappa` is the
//! bridge variance over the whole edge. Edges whose endpoints both sit on the
//! pinned ring are identically zero, hence open exactly when `h <= 0`.
//!
//! Any continuous path between two vertices inside the level set traverses
//! whole edges between consecutive vertices, so vertex-to-vertex connection
//! events are decided exactly by open vertices joined by open edges.
//!
//! Each edge reads the uniform at position `edge id` of the replica's edge
//! substream, so one set of uniforms couples all levels: the open edges at
//! level `h2 >= h1` are a subset of those at `h1`.

use crate::geometry::{BoxSpec, Site};
use crate::rng::{purpose, to_unit, RandomAccess, RngStream};
use crate::sampler::FieldSample;

/// Bridge variance making the vertex restriction consistent with the
/// discrete-time Green's function (see `green`): the vertex law has
/// quadratic form `sum_edges (a - b)^2 / 8`, i.e. edge variance 4.
pub const DEFAULT_KAPPA: f64 = 4.0;

/// Probability that the bridge from `a` to `b` stays at or above `h`.
#[inline]
pub fn open_probability(a: f64, b: f64, h: f64, kappa: f64) -> f64 {
    if a < h || b < h {
        return 0.0;
    }
    -(-2.0 * (a - h) * (b - h) / kappa).exp_m1()
}

/// Decides whether the edge between two adjacent full-box offsets is open.
pub trait EdgeGate {
    fn is_open(&mut self, a: usize, b: usize) -> bool;
}

/// Discrete adjacency: every edge between open vertices is usable.
pub struct AllOpen;

impl EdgeGate for AllOpen {
    #[inline]
    fn is_open(&mut self, _: usize, _: usize) -> bool {
        true
    }
}

#[inline]
fn decide(bx: &BoxSpec, values: &[f64], a: usize, b: usize, h: f64, kappa: f64, u: f64) -> bool {
    let (va, vb) = (values[a], values[b]);
    if va < h || vb < h {
        return false;
    }
    if bx.is_pinned(bx.site(a)) && bx.is_pinned(bx.site(b)) {
        return h <= 0.0;
    }
    u < open_probability(va, vb, h, kappa)
}

/// Fully materialized overlay: one bit per edge of `B_{N+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeOverlay {
    bx: BoxSpec,
    h: f64,
    kappa: f64,
    open: Vec<u64>,
}

impl EdgeOverlay {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.bx
    }

    pub fn is_open_id(&self, id: usize) -> bool {
        self.open[id / 64] >> (id % 64) & 1 == 1
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Open edge ids in increasing order.
    pub fn open_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.bx.num_edges()).filter(|&id| self.is_open_id(id))
    }

    pub fn is_open_between(&self, a: Site, b: Site) -> bool {
        self.bx.edge_id(a, b).is_some_and(|id| self.is_open_id(id))
    }
}

impl EdgeGate for &EdgeOverlay {
    #[inline]
    fn is_open(&mut self, a: usize, b: usize) -> bool {
        self.is_open_id(self.bx.edge_id_offsets(a, b))
    }
}

/// Samples the overlay at level `h` from the edge substream of `stream`.
///
/// # Panics
/// If `kappa` is not positive.
pub fn build_overlay(field: &FieldSample, h: f64, kappa: f64, stream: &RngStream) -> EdgeOverlay {
    assert!(kappa > 0.0, "bridge variance must be positive");
    let bx = field.box_spec();
    let values = field.values();
    let mut rng = stream.child(purpose::EDGES).rng();
    let mut open = vec![0u64; bx.num_edges().div_ceil(64)];
    let side = bx.side();
    let mut id = 0usize;
    let mut visit = |a: usize, b: usize, id: usize, u: f64| {
        if decide(&bx, values, a, b, h, kappa, u) {
            open[id / 64] |= 1 << (id % 64);
        }
    };
    use rand::RngCore;
    for row in 0..side {
        for col in 0..side - 1 {
            let a = row * side + col;
            visit(a, a + 1, id, to_unit(rng.next_u64()));
            id += 1;
        }
    }
    for row in 0..side - 1 {
        for col in 0..side {
            let a = row * side + col;
            visit(a, a + side, id, to_unit(rng.next_u64()));
            id += 1;
        }
    }
    EdgeOverlay { bx, h, kappa, open }
}

/// On-demand overlay with the same outcomes as [`build_overlay`] for the same
/// `(field, h, kappa, stream)`; only the edges actually queried cost a draw.
pub struct LazyOverlay<'a> {
    bx: BoxSpec,
    values: &'a [f64],
    h: f64,
    kappa: f64,
    uniforms: RandomAccess,
}

impl<'a> LazyOverlay<'a> {
    pub fn new(field: &'a FieldSample, h: f64, kappa: f64, stream: &RngStream) -> Self {
        assert!(kappa > 0.0, "bridge variance must be positive");
        LazyOverlay {
            bx: field.box_spec(),
            values: field.values(),
            h,
            kappa,
            uniforms: stream.child(purpose::EDGES).random_access(),
        }
    }
}

impl EdgeGate for LazyOverlay<'_> {
    fn is_open(&mut self, a: usize, b: usize) -> bool {
        let (va, vb) = (self.values[a], self.values[b]);
        if va < self.h || vb < self.h {
            return false;
        }
        let id = self.bx.edge_id_offsets(a, b);
        let u = self.uniforms.uniform_at(id as u64);
        decide(&self.bx, self.values, a, b, self.h, self.kappa, u)
    }
}

/// True iff an open source vertex reaches an open target vertex through open
/// edges of the overlay.
pub fn metric_connects(
    field: &FieldSample,
    overlay: &EdgeOverlay,
    sources: &[Site],
    targets: &[Site],
) -> bool {
    let bx = field.box_spec();
    let mut is_target = vec![false; bx.len()];
    for t in targets {
        if let Some(o) = bx.offset(*t) {
            is_target[o] = true;
        }
    }
    let src: Vec<usize> = sources.iter().filter_map(|s| bx.offset(*s)).collect();
    let mut gate = overlay;
    crate::percolation::search(field, overlay.h(), &mut gate, &src, |o| is_target[o]).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::SpectralSampler;

    #[test]
    fn open_probability_examples() {
        assert_eq!(open_probability(0.3, 1.0, 0.3, 2.0), 0.0);
        let p = open_probability(1.0, 1.0, 0.0, 2.0);
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.632_120_558_8).abs() < 1e-10);
        assert!(open_probability(0.0, 0.0, -1e6, 4.0) > 1.0 - 1e-12);
        assert_eq!(open_probability(-1.0, 2.0, 0.0, 4.0), 0.0);
    }

    #[test]
    fn lazy_matches_materialized() {
        let bx = BoxSpec::new(10);
        let s = SpectralSampler::new(bx);
        for rep in 0..4 {
            let st = RngStream::new(77, rep);
            let f = s.sample(&st);
            for h in [-0.7, 0.0, 0.4] {
                let ov = build_overlay(&f, h, DEFAULT_KAPPA, &st);
                let mut lazy = LazyOverlay::new(&f, h, DEFAULT_KAPPA, &st);
                for (id, (a, b)) in crate::geometry::enumerate_edges(&bx)
                    .into_iter()
                    .enumerate()
                {
                    let (oa, ob) = (bx.offset_unchecked(a), bx.offset_unchecked(b));
                    assert_eq!(lazy.is_open(oa, ob), ov.is_open_id(id));
                }
            }
        }
    }

    #[test]
    fn overlay_is_monotone_in_level() {
        let bx = BoxSpec::new(12);
        let s = SpectralSampler::new(bx);
        let st = RngStream::new(5, 5);
        let f = s.sample(&st);
        let levels = [-1.5, -0.5, 0.0, 0.3, 1.0];
        let overlays: Vec<_> = levels
            .iter()
            .map(|h| build_overlay(&f, *h, 4.0, &st))
            .collect();
        for w in overlays.windows(2) {
            for id in w[1].open_edges() {
                assert!(w[0].is_open_id(id));
            }
        }
    }

    #[test]
    fn open_edges_need_open_endpoints() {
        let bx = BoxSpec::new(8);
        let f = SpectralSampler::new(bx).sample(&RngStream::new(1, 1));
        let ov = build_overlay(&f, 0.2, 4.0, &RngStream::new(1, 1));
        for (id, (a, b)) in crate::geometry::enumerate_edges(&bx)
            .into_iter()
            .enumerate()
        {
            if ov.is_open_id(id) {
                assert!(f.get(a) >= 0.2 && f.get(b) >= 0.2);
            }
        }
    }

    #[test]
    fn endpoint_at_level_closes_edge() {
        let bx = BoxSpec::new(1);
        let f = FieldSample::from_fn(bx, |s| if s == Site::ORIGIN { 0.5 } else { 3.0 });
        let ov = build_overlay(&f, 0.5, 2.0, &RngStream::new(0, 0));
        for nb in Site::ORIGIN.neighbors() {
            assert!(!ov.is_open_between(Site::ORIGIN, nb));
        }
    }

    #[test]
    fn pinned_segments_follow_the_sign_of_the_level() {
        let bx = BoxSpec::new(2);
        let f = FieldSample::from_fn(bx, |_| 1.0);
        let corner = (Site::new(3, 3), Site::new(2, 3));
        let below = build_overlay(&f, -0.1, 4.0, &RngStream::new(0, 0));
        assert!(below.is_open_between(corner.0, corner.1));
        let above = build_overlay(&f, 0.1, 4.0, &RngStream::new(0, 0));
        assert!(!above.is_open_between(corner.0, corner.1));
    }

    #[test]
    fn connection_examples() {
        let bx = BoxSpec::new(2);
        let f = FieldSample::from_fn(bx, |_| 1.0);
        let ov = build_overlay(&f, 0.0, 4.0, &RngStream::new(3, 3));
        assert!(metric_connects(&f, &ov, &[Site::ORIGIN], &[Site::ORIGIN]));

        // Level above every value: no open edges.
        let high = FieldSample::from_fn(bx, |_| 1.0);
        let none = build_overlay(&high, 5.0, 4.0, &RngStream::new(3, 3));
        assert_eq!(none.open_count(), 0);
        assert!(!metric_connects(
            &high,
            &none,
            &[Site::ORIGIN],
            &[Site::new(1, 0)]
        ));

        // Huge values make the single edge open with overwhelming probability.
        let g = FieldSample::from_fn(bx, |s| if s.norm_inf() <= 1 { 1e3 } else { -1.0 });
        let ov = build_overlay(&g, 0.0, 4.0, &RngStream::new(0, 9));
        assert!(ov.is_open_between(Site::ORIGIN, Site::new(1, 0)));
        assert!(metric_connects(
            &g,
            &ov,
            &[Site::ORIGIN],
            &[Site::new(1, 0)]
        ));
    }
}
