//! Green's functions, harmonic measure and Dirichlet solves for the simple
//! random walk on `B_{N+1}` killed on `∂_i B_{N+1}`.
//!
//! Convention: `P` is the discrete-time step kernel (1/4 to each neighbour)
//! restricted to the free sites `B_N`, and `G = (I - P)^{-1}` counts expected
//! visits including time zero. With this convention `G` is exactly the
//! covariance of the field produced by [`crate::sampler`].

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::dst::{DstScratch, SineTransform};
use crate::error::{Error, Result};
use crate::geometry::{BoxSpec, Site};

/// Default cap on the number of free sites for dense tables.
pub const DEFAULT_DENSE_CAP: usize = 4225;

const CACHE_MAGIC: &[u8; 8] = b"GFFGREEN";
const CACHE_VERSION: u32 = 1;

/// Dense Green's function over the free sites of a box.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable {
    bx: BoxSpec,
    /// Row-major over interior offsets.
    values: Vec<f64>,
}

impl GreenTable {
    /// Builds the table by a dense Cholesky factorization of `I - P`.
    pub fn build(bx: BoxSpec) -> Result<Self> {
        Self::build_with_cap(bx, DEFAULT_DENSE_CAP)
    }

    pub fn build_with_cap(bx: BoxSpec, cap: usize) -> Result<Self> {
        let m = bx.interior_len();
        if m > cap {
            return Err(Error::Capacity { needed: m, cap });
        }
        let k = walk_generator_matrix(&bx);
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Solver("I - P is not positive definite".into()))?;
        let inv = chol.inverse();
        let mut values = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                // Symmetrize away round-off.
                values[i * m + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        Ok(GreenTable { bx, values })
    }

    /// Builds the table column by column from the sine eigenbasis.
    pub fn build_spectral(bx: BoxSpec, cap: usize) -> Result<Self> {
        let m = bx.interior_len();
        if m > cap {
            return Err(Error::Capacity { needed: m, cap });
        }
        let spec = Spectrum::new(bx);
        let mut values = vec![0.0; m * m];
        for j in 0..m {
            let col = spec.column(bx.interior_site(j));
            for i in 0..m {
                values[i * m + j] = col[i];
            }
        }
        Ok(GreenTable { bx, values })
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.bx
    }

    /// `G(x, y)`; zero if either site is pinned or outside the box.
    pub fn get(&self, x: Site, y: Site) -> f64 {
        match (self.bx.interior_offset(x), self.bx.interior_offset(y)) {
            (Some(i), Some(j)) => self.values[i * self.bx.interior_len() + j],
            _ => 0.0,
        }
    }

    /// Entry by interior offsets.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.bx.interior_len() + j]
    }

    pub fn dim(&self) -> usize {
        self.bx.interior_len()
    }

    pub fn as_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_row_slice(m, m, &self.values)
    }

    /// Max-norm of `(I - P) G - I`.
    pub fn residual(&self) -> f64 {
        let m = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let x = self.bx.interior_site(i);
            for j in 0..m {
                let mut v = self.at(i, j);
                for y in x.neighbors() {
                    if let Some(k) = self.bx.interior_offset(y) {
                        v -= 0.25 * self.at(k, j);
                    }
                }
                if i == j {
                    v -= 1.0;
                }
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    /// Versioned little-endian binary encoding.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.bx.n().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::decode_cache(&bytes)
    }

    /// Decodes a cache blob, rejecting anything malformed.
    pub fn decode_cache(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
            return Err(Error::Format("missing green table magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::Format(format!(
                "unsupported cache version {version}"
            )));
        }
        let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        if n > 1 << 14 {
            return Err(Error::Format(format!("implausible box size {n}")));
        }
        let bx = BoxSpec::new(n);
        let m = bx.interior_len();
        let body = &bytes[16..];
        if body.len() as u128 != (m as u128) * (m as u128) * 8 {
            return Err(Error::Format(format!(
                "expected {} table bytes for N={n}, found {}",
                (m as u128) * (m as u128) * 8,
                body.len()
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite table entry".into()));
        }
        Ok(GreenTable { bx, values })
    }
}

/// Dense `I - P` over the free sites.
pub fn walk_generator_matrix(bx: &BoxSpec) -> DMatrix<f64> {
    let m = bx.interior_len();
    let mut k = DMatrix::<f64>::identity(m, m);
    for i in 0..m {
        let x = bx.interior_site(i);
        for y in x.neighbors() {
            if let Some(j) = bx.interior_offset(y) {
                k[(i, j)] -= 0.25;
            }
        }
    }
    k
}

/// Sine eigenbasis of the killed walk on the free sites.
///
/// The eigenvectors are `e_jk(x) = (2/M) sin(pi j x'/M) sin(pi k y'/M)` with
/// `x' = x + N + 1`, `M = 2N + 2`, and `I - P` has eigenvalues
/// `(4 - 2cos(pi j/M) - 2cos(pi k/M)) / 4`.
#[derive(Debug)]
pub struct Spectrum {
    bx: BoxSpec,
    /// `sin(pi j i / M)` for `j, i` in `1..=n`, row-major by `j`.
    sines: Vec<f64>,
    /// Laplacian eigenvalues `4 - 2cos - 2cos`, row-major by `(j, k)`.
    lambdas: Vec<f64>,
    transform: SineTransform,
}

impl Spectrum {
    pub fn new(bx: BoxSpec) -> Self {
        let n = bx.interior_side();
        let m = (n + 1) as f64;
        let pi = std::f64::consts::PI;
        let mut sines = vec![0.0; n * n];
        for j in 1..=n {
            for i in 1..=n {
                sines[(j - 1) * n + (i - 1)] = (pi * (j * i) as f64 / m).sin();
            }
        }
        let cosines: Vec<f64> = (1..=n).map(|j| (pi * j as f64 / m).cos()).collect();
        let mut lambdas = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                lambdas[j * n + k] = 4.0 - 2.0 * cosines[j] - 2.0 * cosines[k];
            }
        }
        Spectrum {
            bx,
            sines,
            lambdas,
            transform: SineTransform::new(n),
        }
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.bx
    }

    /// Laplacian eigenvalue for modes `j, k` in `1..=n`.
    pub fn lambda(&self, j: usize, k: usize) -> f64 {
        let n = self.bx.interior_side();
        self.lambdas[(j - 1) * n + (k - 1)]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn transform(&self) -> &SineTransform {
        &self.transform
    }

    /// `G(x, y)` by direct summation over modes.
    pub fn entry(&self, x: Site, y: Site) -> f64 {
        let (Some(_), Some(_)) = (self.bx.interior_offset(x), self.bx.interior_offset(y)) else {
            return 0.0;
        };
        let n = self.bx.interior_side();
        let r = self.bx.radius();
        let (x1, x2) = ((x.x + r) as usize - 1, (x.y + r) as usize - 1);
        let (y1, y2) = ((y.x + r) as usize - 1, (y.y + r) as usize - 1);
        let mut acc = 0.0;
        for j in 0..n {
            let sj = self.sines[j * n + x1] * self.sines[j * n + y1];
            if sj == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for k in 0..n {
                inner += self.sines[k * n + x2] * self.sines[k * n + y2] / self.lambdas[j * n + k];
            }
            acc += sj * inner;
        }
        let m = (n + 1) as f64;
        // (4/lambda) * (2/M)^2 per mode.
        16.0 * acc / (m * m)
    }

    /// Column `G(., y)` over interior offsets.
    pub fn column(&self, y: Site) -> Vec<f64> {
        let n = self.bx.interior_side();
        let mut out = vec![0.0; n * n];
        if self.bx.interior_offset(y).is_none() {
            return out;
        }
        let r = self.bx.radius();
        let (y1, y2) = ((y.x + r) as usize - 1, (y.y + r) as usize - 1);
        let m = (n + 1) as f64;
        // Coefficients in the orthonormal basis, then back to sites.
        // Interior array is row-major with rows indexed by the y coordinate,
        // so the mode along y is the row index.
        for ky in 0..n {
            for jx in 0..n {
                let e = (2.0 / m) * self.sines[jx * n + y1] * self.sines[ky * n + y2];
                out[ky * n + jx] = 4.0 / self.lambdas[jx * n + ky] * e;
            }
        }
        self.transform
            .forward_2d(&mut out, &mut DstScratch::default(), &mut Vec::new());
        for v in &mut out {
            *v *= 2.0 / m;
        }
        out
    }
}

/// `G(x, y)` without building a table.
pub fn green_entry(bx: BoxSpec, x: Site, y: Site) -> f64 {
    Spectrum::new(bx).entry(x, y)
}

/// Build the dense table (capacity-checked).
pub fn green_table(bx: BoxSpec) -> Result<GreenTable> {
    GreenTable::build(bx)
}

/// Conjugate-gradient settings for Dirichlet solves.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop when `||r||_2 <= tol * max(||b||_2, 1)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: 200_000,
        }
    }
}

/// The killed walk on the free sites outside an absorbing set.
///
/// Arrays passed to and returned from this type are indexed by full-box
/// offsets; values on absorbing or pinned sites are ignored on input.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    bx: BoxSpec,
    absorbing: Vec<bool>,
    free: Vec<usize>,
    opts: SolverOptions,
}

impl DirichletProblem {
    /// `absorbing` lists extra absorbing sites; the pinned ring always absorbs.
    pub fn new(bx: BoxSpec, absorbing: &[Site]) -> Self {
        let mut mask = vec![false; bx.len()];
        for (o, m) in mask.iter_mut().enumerate() {
            *m = bx.is_pinned(bx.site(o));
        }
        for s in absorbing {
            if let Some(o) = bx.offset(*s) {
                mask[o] = true;
            }
        }
        Self::from_mask(bx, mask)
    }

    pub fn from_mask(bx: BoxSpec, mut absorbing: Vec<bool>) -> Self {
        assert_eq!(absorbing.len(), bx.len());
        for (o, m) in absorbing.iter_mut().enumerate() {
            if bx.is_pinned(bx.site(o)) {
                *m = true;
            }
        }
        let free = (0..bx.len()).filter(|&o| !absorbing[o]).collect();
        DirichletProblem {
            bx,
            absorbing,
            free,
            opts: SolverOptions::default(),
        }
    }

    pub fn with_options(mut self, opts: SolverOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.bx
    }

    pub fn is_absorbing(&self, offset: usize) -> bool {
        self.absorbing[offset]
    }

    /// Marks more sites absorbing (the free list shrinks).
    pub fn absorb(&mut self, offsets: &[usize]) {
        let mut changed = false;
        for &o in offsets {
            if !self.absorbing[o] {
                self.absorbing[o] = true;
                changed = true;
            }
        }
        if changed {
            let abs = &self.absorbing;
            self.free.retain(|&o| !abs[o]);
        }
    }

    /// `(I - P_FF) u` on free sites; zero elsewhere.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let side = self.bx.side();
        for &o in &self.free {
            let mut acc = 0.0;
            for nb in [o + 1, o - 1, o + side, o - side] {
                if !self.absorbing[nb] {
                    acc += u[nb];
                }
            }
            out[o] = u[o] - 0.25 * acc;
        }
    }

    /// Solves `(I - P_FF) u = rhs` on free sites, starting from `guess`.
    pub fn solve_from(&self, rhs: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let len = self.bx.len();
        let mut u = vec![0.0; len];
        if let Some(g) = guess {
            for &o in &self.free {
                u[o] = g[o];
            }
        }
        if self.free.is_empty() {
            return Ok(u);
        }
        let mut ku = vec![0.0; len];
        self.apply(&u, &mut ku);
        let mut r = vec![0.0; len];
        let mut bnorm2 = 0.0;
        for &o in &self.free {
            r[o] = rhs[o] - ku[o];
            bnorm2 += rhs[o] * rhs[o];
        }
        let target = self.opts.tol * bnorm2.sqrt().max(1.0);
        let mut p = r.clone();
        let mut rr: f64 = self.free.iter().map(|&o| r[o] * r[o]).sum();
        let mut kp = vec![0.0; len];
        for _ in 0..self.opts.max_iter {
            if rr.sqrt() <= target {
                return Ok(u);
            }
            self.apply(&p, &mut kp);
            let pkp: f64 = self.free.iter().map(|&o| p[o] * kp[o]).sum();
            if pkp <= 0.0 {
                return Err(Error::Solver("lost positive definiteness".into()));
            }
            let alpha = rr / pkp;
            let mut rr_new = 0.0;
            for &o in &self.free {
                u[o] += alpha * p[o];
                r[o] -= alpha * kp[o];
                rr_new += r[o] * r[o];
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for &o in &self.free {
                p[o] = r[o] + beta * p[o];
            }
        }
        if rr.sqrt() <= target {
            Ok(u)
        } else {
            Err(Error::Solver(format!(
                "conjugate gradient did not converge: residual {}",
                rr.sqrt()
            )))
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_from(rhs, None)
    }

    /// Harmonic function on free sites with data `d` on absorbing sites
    /// (pinned sites read as zero). The returned array carries `d` on the
    /// absorbing sites.
    pub fn extend(&self, data: &[f64]) -> Result<Vec<f64>> {
        let side = self.bx.side();
        let mut rhs = vec![0.0; self.bx.len()];
        for &o in &self.free {
            let mut acc = 0.0;
            for nb in [o + 1, o - 1, o + side, o - side] {
                if self.absorbing[nb] && !self.bx.is_pinned(self.bx.site(nb)) {
                    acc += data[nb];
                }
            }
            rhs[o] = 0.25 * acc;
        }
        let mut u = self.solve(&rhs)?;
        for o in 0..self.bx.len() {
            if self.absorbing[o] {
                u[o] = if self.bx.is_pinned(self.bx.site(o)) {
                    0.0
                } else {
                    data[o]
                };
            }
        }
        Ok(u)
    }

    /// Green's function of the free region with a unit source on the free
    /// sites in `sources`: `g = sum_{u in sources} G_F(u, .)`.
    pub fn green_from(&self, sources: &[usize], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; self.bx.len()];
        for &o in sources {
            if !self.absorbing[o] {
                rhs[o] += 1.0;
            }
        }
        self.solve_from(&rhs, guess)
    }

    /// Harmonic measure seen from `sources` on each absorbing site, via the
    /// last-exit decomposition of `green_from`. Sources that are themselves
    /// absorbing contribute a point mass.
    pub fn hitting_masses(&self, sources: &[usize], g: &[f64]) -> Vec<f64> {
        let side = self.bx.side();
        let mut mass = vec![0.0; self.bx.len()];
        for &o in &self.free {
            if g[o] == 0.0 {
                continue;
            }
            for nb in [o + 1, o - 1, o + side, o - side] {
                if self.absorbing[nb] {
                    mass[nb] += 0.25 * g[o];
                }
            }
        }
        for &o in sources {
            if self.absorbing[o] {
                mass[o] += 1.0;
            }
        }
        mass
    }
}

/// Exit distribution of the walk from `source` on `A ∪ ∂_i B_{N+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMeasure {
    /// Mass on each site of `A`, in the order given.
    pub masses: Vec<(Site, f64)>,
    /// Mass absorbed on the pinned ring.
    pub escape: f64,
}

impl HarmonicMeasure {
    pub fn total(&self) -> f64 {
        self.masses.iter().map(|(_, p)| p).sum::<f64>() + self.escape
    }

    pub fn mass(&self, s: Site) -> f64 {
        self.masses
            .iter()
            .filter(|(t, _)| *t == s)
            .map(|(_, p)| p)
            .sum()
    }
}

/// `H_N(source, . ; A)` together with the escape mass.
pub fn harmonic_measure(bx: BoxSpec, a: &[Site], source: Site) -> Result<HarmonicMeasure> {
    if a.is_empty() {
        return Err(Error::Domain("harmonic measure of an empty set".into()));
    }
    let src = bx
        .offset(source)
        .ok_or_else(|| Error::Domain(format!("source {source:?} outside the box")))?;
    let mut uniq: Vec<Site> = a.to_vec();
    uniq.sort();
    uniq.dedup();
    for s in &uniq {
        if !bx.contains(*s) {
            return Err(Error::Domain(format!("site {s:?} outside the box")));
        }
    }
    if bx.is_pinned(source) && !uniq.contains(&source) {
        return Ok(HarmonicMeasure {
            masses: uniq.into_iter().map(|s| (s, 0.0)).collect(),
            escape: 1.0,
        });
    }
    // Sites of A on the pinned ring receive their own mass, not escape mass.
    let problem = DirichletProblem::new(bx, &uniq);
    let g = problem.green_from(&[src], None)?;
    let mass = problem.hitting_masses(&[src], &g);
    let mut in_a = vec![false; bx.len()];
    let masses: Vec<(Site, f64)> = uniq
        .iter()
        .map(|s| {
            let o = bx.offset_unchecked(*s);
            in_a[o] = true;
            (*s, mass[o])
        })
        .collect();
    let escape = (0..bx.len())
        .filter(|&o| !in_a[o] && bx.is_pinned(bx.site(o)))
        .map(|o| mass[o])
        .sum();
    Ok(HarmonicMeasure { masses, escape })
}

/// Harmonic extension of `data` given on `V`, zero on the pinned ring;
/// returned over full-box offsets.
pub fn harmonic_extension(bx: BoxSpec, data: &[(Site, f64)]) -> Result<Vec<f64>> {
    let sites: Vec<Site> = data.iter().map(|(s, _)| *s).collect();
    for s in &sites {
        if !bx.is_interior(*s) {
            return Err(Error::Domain(format!(
                "conditioning site {s:?} not interior"
            )));
        }
    }
    let problem = DirichletProblem::new(bx, &sites);
    let mut d = vec![0.0; bx.len()];
    for (s, v) in data {
        if !v.is_finite() {
            return Err(Error::Domain("non-finite boundary data".into()));
        }
        d[bx.offset_unchecked(*s)] = *v;
    }
    problem.extend(&d)
}

/// Probability that the walk from `x` hits `S` before the pinned ring.
pub fn hit_probability(bx: BoxSpec, x: Site, s: &[Site]) -> Result<f64> {
    let data: Vec<(Site, f64)> = s.iter().map(|t| (*t, 1.0)).collect();
    let u = harmonic_extension(bx, &data)?;
    bx.offset(x)
        .map(|o| u[o])
        .ok_or_else(|| Error::Domain(format!("{x:?} outside the box")))
}

/// `H_N(x, S)` under the preconditions of the two-sided hitting estimate:
/// `S` nearest-neighbour connected with `0 ∈ S ⊂ B_{N/2}` and
/// `x ∈ A_{5N/8, 7N/8}`.
pub fn hitting_probability_annulus(bx: BoxSpec, x: Site, s: &[Site]) -> Result<f64> {
    let n = bx.n() as f64;
    if !s.contains(&Site::ORIGIN) {
        return Err(Error::Domain("S must contain the origin".into()));
    }
    if s.iter().any(|t| t.norm_inf() as f64 > n / 2.0) {
        return Err(Error::Domain("S must lie in B_{N/2}".into()));
    }
    if !is_connected(s) {
        return Err(Error::Domain("S must be connected".into()));
    }
    let r = x.norm_inf() as f64;
    if !(r > 5.0 * n / 8.0 && r <= 7.0 * n / 8.0) {
        return Err(Error::Domain(format!("{x:?} not in A_(5N/8, 7N/8)")));
    }
    hit_probability(bx, x, s)
}

fn is_connected(s: &[Site]) -> bool {
    use std::collections::{HashSet, VecDeque};
    let set: HashSet<Site> = s.iter().copied().collect();
    let Some(&start) = s.first() else {
        return false;
    };
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for w in v.neighbors() {
            if set.contains(&w) && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen.len() == set.len()
}

/// Escape probability `P^x[τ_{∂B_n} < τ_A]` for the walk in `B_n`.
pub fn escape_probability(n: u32, a: &[Site], x: Site) -> Result<f64> {
    let bx = BoxSpec::new(n);
    Ok(1.0 - hit_probability(bx, x, a)?)
}

/// Dense linear solve of `(I - P) g = e_y` (reference route for tests).
pub fn green_column_dense(bx: BoxSpec, y: Site) -> Result<Vec<f64>> {
    let j = bx
        .interior_offset(y)
        .ok_or_else(|| Error::Domain(format!("{y:?} not interior")))?;
    let k = walk_generator_matrix(&bx);
    let mut e = DVector::zeros(bx.interior_len());
    e[j] = 1.0;
    let lu = k.lu();
    lu.solve(&e)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Solver("singular generator".into()))
}
