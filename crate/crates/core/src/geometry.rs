//! Lattice boxes, annuli, boundaries and dense indexing.
//!
//! A [`BoxSpec`] with half side `n` stands for the vertex set `B_{n+1}`: the
//! sites `|x|_inf <= n` carry field values and the ring `|x|_inf = n + 1` is
//! the pinned Dirichlet boundary. All per-site data in this crate is stored in
//! row-major arrays over `B_{n+1}`.

use crate::error::{Error, Result};

/// A point of `Z^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const ORIGIN: Site = Site { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }

    /// `l_inf` norm.
    pub fn norm_inf(self) -> i32 {
        self.x.abs().max(self.y.abs())
    }

    pub fn dist_inf(self, other: Site) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    /// The four nearest neighbours, unfiltered.
    pub fn neighbors(self) -> [Site; 4] {
        let Site { x, y } = self;
        [
            Site::new(x + 1, y),
            Site::new(x - 1, y),
            Site::new(x, y + 1),
            Site::new(x, y - 1),
        ]
    }

    /// The eight sites at `l_inf` distance one, unfiltered.
    pub fn star_neighbors(self) -> [Site; 8] {
        let Site { x, y } = self;
        [
            Site::new(x - 1, y - 1),
            Site::new(x, y - 1),
            Site::new(x + 1, y - 1),
            Site::new(x - 1, y),
            Site::new(x + 1, y),
            Site::new(x - 1, y + 1),
            Site::new(x, y + 1),
            Site::new(x + 1, y + 1),
        ]
    }

    /// Applies one of the eight symmetries of the square (`0..8`).
    pub fn transform(self, symmetry: u8) -> Site {
        let Site { x, y } = self;
        match symmetry % 8 {
            0 => Site::new(x, y),
            1 => Site::new(-y, x),
            2 => Site::new(-x, -y),
            3 => Site::new(y, -x),
            4 => Site::new(-x, y),
            5 => Site::new(x, -y),
            6 => Site::new(y, x),
            _ => Site::new(-y, -x),
        }
    }
}

impl From<(i32, i32)> for Site {
    fn from((x, y): (i32, i32)) -> Self {
        Site::new(x, y)
    }
}

/// The box `B_{n+1}` with Dirichlet boundary on its inner boundary ring.
///
/// Doubles as the site index: [`BoxSpec::offset`] and [`BoxSpec::site`] are
/// mutually inverse between coordinates and dense row-major offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoxSpec {
    n: u32,
}

impl BoxSpec {
    pub fn new(n: u32) -> Self {
        BoxSpec { n }
    }

    /// Half side length `N` of the interior box `B_N`.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Radius of the pinned ring, `N + 1`.
    pub fn radius(&self) -> i32 {
        self.n as i32 + 1
    }

    /// Side length of the full vertex array, `2N + 3`.
    pub fn side(&self) -> usize {
        2 * self.n as usize + 3
    }

    /// Side length of the free interior `B_N`, `2N + 1`.
    pub fn interior_side(&self) -> usize {
        2 * self.n as usize + 1
    }

    /// Number of vertices of `B_{N+1}`.
    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interior_len(&self) -> usize {
        self.interior_side() * self.interior_side()
    }

    pub fn contains(&self, s: Site) -> bool {
        s.norm_inf() <= self.radius()
    }

    /// True on the free sites `B_N`.
    pub fn is_interior(&self, s: Site) -> bool {
        s.norm_inf() <= self.n as i32
    }

    /// True on `∂_i B_{N+1}`, where the field is pinned to zero.
    pub fn is_pinned(&self, s: Site) -> bool {
        s.norm_inf() == self.radius()
    }

    pub fn offset(&self, s: Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        let r = self.radius();
        Some((s.y + r) as usize * self.side() + (s.x + r) as usize)
    }

    /// Offset of a site known to lie in the box.
    #[inline]
    pub fn offset_unchecked(&self, s: Site) -> usize {
        let r = self.radius();
        (s.y + r) as usize * self.side() + (s.x + r) as usize
    }

    pub fn site(&self, offset: usize) -> Site {
        let side = self.side();
        let r = self.radius();
        Site::new((offset % side) as i32 - r, (offset / side) as i32 - r)
    }

    /// Offset of an interior site in the dense `(2N+1)^2` interior array.
    pub fn interior_offset(&self, s: Site) -> Option<usize> {
        if !self.is_interior(s) {
            return None;
        }
        let n = self.n as i32;
        Some((s.y + n) as usize * self.interior_side() + (s.x + n) as usize)
    }

    pub fn interior_site(&self, offset: usize) -> Site {
        let side = self.interior_side();
        let n = self.n as i32;
        Site::new((offset % side) as i32 - n, (offset / side) as i32 - n)
    }

    /// All sites of `B_{N+1}` in offset order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |o| self.site(o))
    }

    /// All free sites of `B_N` in interior-offset order.
    pub fn interior_sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.interior_len()).map(move |o| self.interior_site(o))
    }

    /// Nearest neighbours of `s` that lie in the box.
    pub fn neighbors_in(&self, s: Site) -> impl Iterator<Item = Site> + '_ {
        s.neighbors().into_iter().filter(move |t| self.contains(*t))
    }

    /// Star neighbours of `s` that lie in the box.
    pub fn star_neighbors_in(&self, s: Site) -> impl Iterator<Item = Site> + '_ {
        s.star_neighbors()
            .into_iter()
            .filter(move |t| self.contains(*t))
    }

    pub fn num_edges(&self) -> usize {
        2 * self.side() * (self.side() - 1)
    }

    /// Dense edge id between two adjacent sites of the box.
    ///
    /// Horizontal edges come first (row-major by their left endpoint), then
    /// vertical edges (row-major by their lower endpoint). This is also the
    /// order of [`enumerate_edges`].
    pub fn edge_id(&self, a: Site, b: Site) -> Option<usize> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let side = self.side();
        let r = self.radius();
        let row = (lo.y + r) as usize;
        let col = (lo.x + r) as usize;
        if lo.y == hi.y && hi.x == lo.x + 1 {
            Some(row * (side - 1) + col)
        } else if lo.x == hi.x && hi.y == lo.y + 1 {
            Some(side * (side - 1) + row * side + col)
        } else {
            None
        }
    }

    /// Edge id from dense offsets of two adjacent sites; no bounds checks.
    #[inline]
    pub fn edge_id_offsets(&self, a: usize, b: usize) -> usize {
        let side = self.side();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let row = lo / side;
        let col = lo % side;
        if hi == lo + 1 {
            row * (side - 1) + col
        } else {
            side * (side - 1) + row * side + col
        }
    }

    /// Ring `|x|_inf = r` in counter-clockwise order starting at `(r, -r)`;
    /// `{0}` for `r = 0`.
    pub fn ring(r: i32) -> Vec<Site> {
        if r == 0 {
            return vec![Site::ORIGIN];
        }
        let mut out = Vec::with_capacity(8 * r as usize);
        for y in -r..r {
            out.push(Site::new(r, y));
        }
        for x in (-r + 1..=r).rev() {
            out.push(Site::new(x, r));
        }
        for y in (-r + 1..=r).rev() {
            out.push(Site::new(-r, y));
        }
        for x in -r..r {
            out.push(Site::new(x, -r));
        }
        out
    }
}

/// `A_{inner, outer} = B_outer \ B_inner`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annulus {
    inner: u32,
    outer: u32,
}

impl Annulus {
    pub fn new(inner: u32, outer: u32) -> Result<Self> {
        if inner == 0 || inner >= outer {
            return Err(Error::Domain(format!(
                "annulus needs 0 < inner < outer, got ({inner}, {outer})"
            )));
        }
        Ok(Annulus { inner, outer })
    }

    pub fn inner(&self) -> u32 {
        self.inner
    }

    pub fn outer(&self) -> u32 {
        self.outer
    }

    pub fn contains(&self, s: Site) -> bool {
        let r = s.norm_inf();
        r > self.inner as i32 && r <= self.outer as i32
    }

    pub fn sites(&self) -> Vec<Site> {
        (self.inner as i32 + 1..=self.outer as i32)
            .flat_map(BoxSpec::ring)
            .collect()
    }
}

/// Every nearest-neighbour pair of `B_{N+1}`, once, in edge-id order.
pub fn enumerate_edges(bx: &BoxSpec) -> Vec<(Site, Site)> {
    let side = bx.side();
    let r = bx.radius();
    let mut out = Vec::with_capacity(bx.num_edges());
    for row in 0..side as i32 {
        for col in 0..side as i32 - 1 {
            out.push((Site::new(col - r, row - r), Site::new(col + 1 - r, row - r)));
        }
    }
    for row in 0..side as i32 - 1 {
        for col in 0..side as i32 {
            out.push((Site::new(col - r, row - r), Site::new(col - r, row + 1 - r)));
        }
    }
    out
}

/// Inner and outer boundary of `B_k`: `(∂_i B_k, ∂B_k)`.
///
/// For `k = N + 1` the outer boundary lies outside the stored box; its
/// coordinates are still returned.
pub fn boundary_sets(bx: &BoxSpec, k: i32) -> Result<(Vec<Site>, Vec<Site>)> {
    if k < 0 || k > bx.radius() {
        return Err(Error::Domain(format!(
            "boundary radius {k} outside 0..={}",
            bx.radius()
        )));
    }
    let inner = BoxSpec::ring(k);
    let m = k + 1;
    let outer = BoxSpec::ring(m)
        .into_iter()
        .filter(|s| !(s.x.abs() == m && s.y.abs() == m))
        .collect();
    Ok((inner, outer))
}

/// Star neighbours of `site`, optionally restricted to a box.
pub fn star_neighbors(site: Site, within: Option<&BoxSpec>) -> Vec<Site> {
    match within {
        Some(bx) => bx.star_neighbors_in(site).collect(),
        None => site.star_neighbors().to_vec(),
    }
}
