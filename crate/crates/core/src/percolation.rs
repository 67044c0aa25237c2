//! Connectivity queries on realized level sets.
//!
//! Sites with value `>= h` are open. Both modes work on the vertex set
//! `B_{N+1}`, the pinned ring carrying value zero; in metric mode an edge is
//! usable only when the overlay opens it.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{Annulus, BoxSpec, Site};
use crate::overlay::{AllOpen, EdgeGate, EdgeOverlay};
use crate::sampler::FieldSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Nearest-neighbour adjacency between open sites.
    Discrete,
    /// Adjacency gated by the metric-graph overlay.
    Metric,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Discrete => "discrete",
            Mode::Metric => "metric",
        })
    }
}

/// Nearest neighbours of `o` inside the stored box.
#[inline]
pub(crate) fn nn_offsets(side: usize, o: usize, out: &mut [usize; 4]) -> usize {
    let (row, col) = (o / side, o % side);
    let mut k = 0;
    if col + 1 < side {
        out[k] = o + 1;
        k += 1;
    }
    if col > 0 {
        out[k] = o - 1;
        k += 1;
    }
    if row + 1 < side {
        out[k] = o + side;
        k += 1;
    }
    if row > 0 {
        out[k] = o - side;
        k += 1;
    }
    k
}

/// Multi-source breadth-first search through open sites; returns the graph
/// distance to the first open target, or `None` if none is reachable.
pub fn search<G: EdgeGate + ?Sized>(
    field: &FieldSample,
    h: f64,
    gate: &mut G,
    sources: &[usize],
    is_target: impl Fn(usize) -> bool,
) -> Option<u32> {
    let bx = field.box_spec();
    let values = field.values();
    let side = bx.side();
    let mut dist = vec![u32::MAX; bx.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if values[s] >= h && dist[s] == u32::MAX {
            if is_target(s) {
                return Some(0);
            }
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    let mut nb = [0usize; 4];
    while let Some(v) = queue.pop_front() {
        let d = dist[v] + 1;
        let k = nn_offsets(side, v, &mut nb);
        for &w in &nb[..k] {
            if dist[w] != u32::MAX || values[w] < h || !gate.is_open(v, w) {
                continue;
            }
            if is_target(w) {
                return Some(d);
            }
            dist[w] = d;
            queue.push_back(w);
        }
    }
    None
}

/// True iff the origin's cluster reaches the ring `|x|_inf = radius`.
pub fn reaches_ring<G: EdgeGate + ?Sized>(
    field: &FieldSample,
    h: f64,
    gate: &mut G,
    radius: i32,
) -> bool {
    let bx = field.box_spec();
    let origin = bx.offset_unchecked(Site::ORIGIN);
    let side = bx.side() as i32;
    let r = bx.radius();
    search(field, h, gate, &[origin], |o| {
        let (x, y) = ((o as i32 % side) - r, (o as i32 / side) - r);
        x.abs().max(y.abs()) >= radius
    })
    .is_some()
}

fn check_overlay(mode: Mode, overlay: Option<&EdgeOverlay>) -> Result<()> {
    match (mode, overlay) {
        (Mode::Metric, None) => Err(Error::Domain("metric mode needs an edge overlay".into())),
        _ => Ok(()),
    }
}

fn with_gate<T>(
    mode: Mode,
    overlay: Option<&EdgeOverlay>,
    f: impl FnOnce(&mut dyn EdgeGate) -> T,
) -> Result<T> {
    check_overlay(mode, overlay)?;
    Ok(match (mode, overlay) {
        (Mode::Metric, Some(ov)) => {
            let mut g = ov;
            f(&mut g)
        }
        _ => f(&mut AllOpen),
    })
}

/// Radius of `∂B_{floor(rN)}`: the first ring outside `B_{floor(rN)}`.
pub fn bulk_target_radius(n: u32, r: f64) -> i32 {
    (r * n as f64).floor() as i32 + 1
}

/// `{0 <-> ∂B_{floor(rN)}}` under the given mode.
pub fn one_arm_bulk(
    field: &FieldSample,
    h: f64,
    mode: Mode,
    r: f64,
    overlay: Option<&EdgeOverlay>,
) -> Result<bool> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(Error::Domain(format!(
            "bulk radius fraction {r} not in (0, 1/2]"
        )));
    }
    let radius = bulk_target_radius(field.box_spec().n(), r);
    with_gate(mode, overlay, |g| reaches_ring(field, h, g, radius))
}

/// `{0 <-> ∂_i B_N}` under the given mode.
pub fn one_arm_boundary(
    field: &FieldSample,
    h: f64,
    mode: Mode,
    overlay: Option<&EdgeOverlay>,
) -> Result<bool> {
    let radius = field.box_spec().n() as i32;
    with_gate(mode, overlay, |g| reaches_ring(field, h, g, radius))
}

/// `{0 <-> ∂B_N}`: reaching the pinned ring.
pub fn one_arm_pinned(
    field: &FieldSample,
    h: f64,
    mode: Mode,
    overlay: Option<&EdgeOverlay>,
) -> Result<bool> {
    let radius = field.box_spec().radius();
    with_gate(mode, overlay, |g| reaches_ring(field, h, g, radius))
}

/// Cluster ids of open sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    bx: BoxSpec,
    mode: Mode,
    /// Dense ids `0..count` by full-box offset; [`ClusterLabels::CLOSED`] on
    /// closed sites. Ids are assigned in order of first appearance.
    ids: Vec<u32>,
    count: u32,
}

impl ClusterLabels {
    pub const CLOSED: u32 = u32::MAX;

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn count(&self) -> usize {
        self.count as usize
    }

    pub fn id(&self, s: Site) -> u32 {
        self.bx.offset(s).map_or(Self::CLOSED, |o| self.ids[o])
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn connected(&self, a: Site, b: Site) -> bool {
        let (ia, ib) = (self.id(a), self.id(b));
        ia != Self::CLOSED && ia == ib
    }
}

/// Disjoint sets with path halving and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (ka, kb) = (self.rank[ra as usize], self.rank[rb as usize]);
        if ka < kb {
            self.parent[ra as usize] = rb;
        } else if ka > kb {
            self.parent[rb as usize] = ra;
        } else {
            self.parent[rb as usize] = ra;
            self.rank[ra as usize] += 1;
        }
        true
    }
}

/// Labels the open clusters by union-find over the usable edges.
pub fn label_clusters(
    field: &FieldSample,
    h: f64,
    mode: Mode,
    overlay: Option<&EdgeOverlay>,
) -> Result<ClusterLabels> {
    with_gate(mode, overlay, |g| label_with_gate(field, h, mode, g))
}

fn label_with_gate(
    field: &FieldSample,
    h: f64,
    mode: Mode,
    gate: &mut dyn EdgeGate,
) -> ClusterLabels {
    let bx = field.box_spec();
    let values = field.values();
    let side = bx.side();
    let mut uf = UnionFind::new(bx.len());
    for o in 0..bx.len() {
        if values[o] < h {
            continue;
        }
        let col = o % side;
        if col + 1 < side && values[o + 1] >= h && gate.is_open(o, o + 1) {
            uf.union(o as u32, (o + 1) as u32);
        }
        if o + side < bx.len() && values[o + side] >= h && gate.is_open(o, o + side) {
            uf.union(o as u32, (o + side) as u32);
        }
    }
    let mut root_id = vec![ClusterLabels::CLOSED; bx.len()];
    let mut ids = vec![ClusterLabels::CLOSED; bx.len()];
    let mut count = 0u32;
    for o in 0..bx.len() {
        if values[o] < h {
            continue;
        }
        let r = uf.find(o as u32) as usize;
        if root_id[r] == ClusterLabels::CLOSED {
            root_id[r] = count;
            count += 1;
        }
        ids[o] = root_id[r];
    }
    ClusterLabels {
        bx,
        mode,
        ids,
        count,
    }
}

/// Radii `(k, l) = (floor(alpha N), floor(beta N))` of the circuit annulus.
pub fn circuit_radii(n: u32, alpha: f64, beta: f64) -> Result<(u32, u32)> {
    if !(alpha > 0.0 && alpha < beta && beta < 1.0) {
        return Err(Error::Domain(format!(
            "circuit needs 0 < alpha < beta < 1, got ({alpha}, {beta})"
        )));
    }
    let k = (alpha * n as f64).floor() as u32;
    let l = (beta * n as f64).floor() as u32;
    if k == 0 || k >= l {
        return Err(Error::Domain(format!(
            "annulus radii ({k}, {l}) degenerate for N = {n}"
        )));
    }
    Ok((k, l))
}

/// Open nearest-neighbour circuit in `A_{floor(alpha N), floor(beta N)}`
/// surrounding the inner box, decided by duality: it exists iff no
/// star-connected path of closed sites (`< h`) inside the annulus joins its
/// inner ring to its outer ring.
pub fn circuit_in_annulus(field: &FieldSample, h: f64, alpha: f64, beta: f64) -> Result<bool> {
    let (k, l) = circuit_radii(field.box_spec().n(), alpha, beta)?;
    Ok(circuit_dual(field, h, Annulus::new(k, l)?))
}

/// Duality test on an explicit annulus.
pub fn circuit_dual(field: &FieldSample, h: f64, annulus: Annulus) -> bool {
    let bx = field.box_spec();
    let (k, l) = (annulus.inner() as i32, annulus.outer() as i32);
    debug_assert!(l <= bx.radius());
    let values = field.values();
    let mut seen = vec![false; bx.len()];
    let mut queue = VecDeque::new();
    for s in BoxSpec::ring(k + 1) {
        let o = bx.offset_unchecked(s);
        if values[o] < h {
            if k + 1 == l {
                return false;
            }
            seen[o] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for w in v.star_neighbors() {
            if !annulus.contains(w) {
                continue;
            }
            let o = bx.offset_unchecked(w);
            if seen[o] || values[o] >= h {
                continue;
            }
            if w.norm_inf() == l {
                return false;
            }
            seen[o] = true;
            queue.push_back(w);
        }
    }
    true
}

/// Direct search for an open circuit surrounding the inner box: explores the
/// open sites of the annulus while tracking how often the walk crosses the
/// half-line `{y = 1/2, x > 1/2}`; two different crossing counts at one site
/// close a loop of non-zero winding number.
pub fn circuit_direct(field: &FieldSample, h: f64, annulus: Annulus) -> bool {
    let bx = field.box_spec();
    let values = field.values();
    let mut winding: Vec<Option<i32>> = vec![None; bx.len()];
    let crossing = |a: Site, b: Site| -> i32 {
        if a.x == b.x && a.x >= 1 {
            match (a.y, b.y) {
                (0, 1) => 1,
                (1, 0) => -1,
                _ => 0,
            }
        } else {
            0
        }
    };
    for start in annulus.sites() {
        let so = bx.offset_unchecked(start);
        if values[so] < h || winding[so].is_some() {
            continue;
        }
        winding[so] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let wv = winding[bx.offset_unchecked(v)].unwrap();
            for u in v.neighbors() {
                if !annulus.contains(u) {
                    continue;
                }
                let uo = bx.offset_unchecked(u);
                if values[uo] < h {
                    continue;
                }
                let expect = wv + crossing(v, u);
                match winding[uo] {
                    None => {
                        winding[uo] = Some(expect);
                        queue.push_back(u);
                    }
                    Some(w) if w != expect => return true,
                    Some(_) => {}
                }
            }
        }
    }
    false
}

/// Graph distance inside the open set between two vertex sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChemicalDistanceResult {
    /// `None` when the sets are not connected.
    pub distance: Option<u32>,
}

impl ChemicalDistanceResult {
    pub fn is_connected(&self) -> bool {
        self.distance.is_some()
    }
}

/// Discrete-mode chemical distance `D_{N,h}(A, B)`.
pub fn chemical_distance(
    field: &FieldSample,
    h: f64,
    a: &[Site],
    b: &[Site],
) -> ChemicalDistanceResult {
    let bx = field.box_spec();
    let mut is_target = vec![false; bx.len()];
    for t in b {
        if let Some(o) = bx.offset(*t) {
            is_target[o] = true;
        }
    }
    let src: Vec<usize> = a.iter().filter_map(|s| bx.offset(*s)).collect();
    ChemicalDistanceResult {
        distance: search(field, h, &mut AllOpen, &src, |o| is_target[o]),
    }
}

/// `D_{N,h}(B_inner, ring)` where `ring` is the radius of the target ring.
pub fn chemical_distance_box_to_ring(
    field: &FieldSample,
    h: f64,
    inner: i32,
    ring: i32,
) -> ChemicalDistanceResult {
    let bx = field.box_spec();
    let src: Vec<usize> = (-inner..=inner)
        .flat_map(|y| (-inner..=inner).map(move |x| Site::new(x, y)))
        .map(|s| bx.offset_unchecked(s))
        .collect();
    let side = bx.side() as i32;
    let r = bx.radius();
    let distance = search(field, h, &mut AllOpen, &src, |o| {
        let (x, y) = ((o as i32 % side) - r, (o as i32 / side) - r);
        x.abs().max(y.abs()) == ring
    });
    ChemicalDistanceResult { distance }
}
