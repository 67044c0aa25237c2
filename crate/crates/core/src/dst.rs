//! Type-I discrete sine transform.
//!
//! `S(x)_i = sum_{j=1..n} x_j sin(pi i j / (n + 1))` for `i = 1..n`. The
//! transform satisfies `S S = (n + 1) / 2 * I`, so `sqrt(2 / (n + 1)) S` is
//! orthogonal and symmetric. The fast path folds the input into an auxiliary
//! sequence whose real FFT of length `n + 1` yields the even outputs directly
//! and the odd outputs through a running sum; two real sequences share one
//! complex FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Below this size the direct O(n^2) sum is used.
const DIRECT_MAX: usize = 8;

pub struct SineTransform {
    n: usize,
    fft: Option<Arc<dyn Fft<f64>>>,
    /// `sin(pi j / (n + 1))` for `j = 0..=n`.
    twiddle: Vec<f64>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform")
            .field("n", &self.n)
            .field("fast", &self.fft.is_some())
            .finish()
    }
}

/// Reusable buffers for [`SineTransform`].
#[derive(Default)]
pub struct DstScratch {
    buf: Vec<Complex<f64>>,
    fft: Vec<Complex<f64>>,
    tmp: Vec<f64>,
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let fft = (n > DIRECT_MAX).then(|| FftPlanner::new().plan_fft_forward(n + 1));
        let m = (n + 1) as f64;
        let twiddle = (0..=n)
            .map(|j| (std::f64::consts::PI * j as f64 / m).sin())
            .collect();
        SineTransform { n, fft, twiddle }
    }

    /// Direct evaluation regardless of size.
    pub fn direct(n: usize) -> Self {
        SineTransform {
            n,
            fft: None,
            twiddle: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized transform of `a` and `b` in place.
    pub fn forward_pair(&self, a: &mut [f64], b: &mut [f64], scratch: &mut DstScratch) {
        assert_eq!(a.len(), self.n);
        assert_eq!(b.len(), self.n);
        match &self.fft {
            None => {
                dst1_direct_into(a, &mut scratch.tmp);
                a.copy_from_slice(&scratch.tmp);
                dst1_direct_into(b, &mut scratch.tmp);
                b.copy_from_slice(&scratch.tmp);
            }
            Some(fft) => {
                let n = self.n;
                let m = n + 1;
                let buf = &mut scratch.buf;
                buf.clear();
                buf.resize(m, Complex::new(0.0, 0.0));
                // z_j = sin(pi j/m)(y_j + y_{m-j}) + (y_j - y_{m-j})/2, y_0 = 0.
                for j in 1..m {
                    let (ya, yar) = (a[j - 1], a[m - j - 1]);
                    let (yb, ybr) = (b[j - 1], b[m - j - 1]);
                    let t = self.twiddle[j];
                    buf[j] = Complex::new(
                        t * (ya + yar) + 0.5 * (ya - yar),
                        t * (yb + ybr) + 0.5 * (yb - ybr),
                    );
                }
                let need = fft.get_inplace_scratch_len();
                if scratch.fft.len() < need {
                    scratch.fft.resize(need, Complex::new(0.0, 0.0));
                }
                fft.process_with_scratch(buf, &mut scratch.fft[..need]);
                // Unpack the two real spectra; with the e^{-i} convention the
                // sine sums are minus the imaginary parts.
                let (mut odd_a, mut odd_b) = (0.0, 0.0);
                for k in 0..=n / 2 {
                    let zk = buf[k];
                    let zr = buf[(m - k) % m].conj();
                    let fa = 0.5 * (zk + zr);
                    let fb = Complex::new(0.0, -0.5) * (zk - zr);
                    if k > 0 {
                        a[2 * k - 1] = -fa.im;
                        b[2 * k - 1] = -fb.im;
                    }
                    if k == 0 {
                        odd_a = 0.5 * fa.re;
                        odd_b = 0.5 * fb.re;
                    } else {
                        odd_a += fa.re;
                        odd_b += fb.re;
                    }
                    if 2 * k < n {
                        a[2 * k] = odd_a;
                        b[2 * k] = odd_b;
                    }
                }
            }
        }
    }

    /// Unnormalized transform of one vector in place.
    pub fn forward(&self, a: &mut [f64], scratch: &mut DstScratch) {
        let mut zero = std::mem::take(&mut scratch.tmp);
        zero.clear();
        zero.resize(self.n, 0.0);
        let mut b = zero;
        self.forward_pair(a, &mut b, scratch);
        scratch.tmp = b;
    }

    /// Unnormalized 2D transform of a row-major `n x n` array in place.
    pub fn forward_2d(&self, data: &mut [f64], scratch: &mut DstScratch, transpose: &mut Vec<f64>) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        self.rows(data, scratch);
        transpose.resize(n * n, 0.0);
        transpose_into(data, transpose, n);
        self.rows(transpose, scratch);
        transpose_into(transpose, data, n);
    }

    fn rows(&self, data: &mut [f64], scratch: &mut DstScratch) {
        let n = self.n;
        let mut chunks = data.chunks_exact_mut(2 * n);
        for pair in &mut chunks {
            let (a, b) = pair.split_at_mut(n);
            self.forward_pair(a, b, scratch);
        }
        let rest = chunks.into_remainder();
        if !rest.is_empty() {
            self.forward(rest, scratch);
        }
    }
}

fn transpose_into(src: &[f64], dst: &mut [f64], n: usize) {
    const TILE: usize = 32;
    for i0 in (0..n).step_by(TILE) {
        for j0 in (0..n).step_by(TILE) {
            for i in i0..(i0 + TILE).min(n) {
                for j in j0..(j0 + TILE).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

fn dst1_direct_into(x: &[f64], out: &mut Vec<f64>) {
    let n = x.len();
    let m = (n + 1) as f64;
    out.clear();
    out.extend((1..=n).map(|i| {
        x.iter()
            .enumerate()
            .map(|(j, v)| v * (std::f64::consts::PI * (i * (j + 1)) as f64 / m).sin())
            .sum::<f64>()
    }));
}

/// Direct O(n^2) unnormalized DST-I.
pub fn dst1_direct(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    dst1_direct_into(x, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fast_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [9, 17, 33, 65, 129, 130] {
            let t = SineTransform::new(n);
            let mut s = DstScratch::default();
            let a0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let b0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let (mut a, mut b) = (a0.clone(), b0.clone());
            t.forward_pair(&mut a, &mut b, &mut s);
            let (ea, eb) = (dst1_direct(&a0), dst1_direct(&b0));
            for i in 0..n {
                assert!((a[i] - ea[i]).abs() < 1e-10, "n={n}");
                assert!((b[i] - eb[i]).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn transform_is_involution_up_to_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [3, 8, 33] {
            let t = SineTransform::new(n);
            let mut s = DstScratch::default();
            let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut y = x.clone();
            t.forward(&mut y, &mut s);
            t.forward(&mut y, &mut s);
            let scale = (n + 1) as f64 / 2.0;
            for i in 0..n {
                assert!((y[i] / scale - x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_dimensional_matches_separable_direct() {
        let n = 11;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
        let t = SineTransform::new(n);
        let mut y = x.clone();
        t.forward_2d(&mut y, &mut DstScratch::default(), &mut Vec::new());
        let m = (n + 1) as f64;
        let pi = std::f64::consts::PI;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        acc += x[p * n + q]
                            * (pi * ((i + 1) * (p + 1)) as f64 / m).sin()
                            * (pi * ((j + 1) * (q + 1)) as f64 / m).sin();
                    }
                }
                assert!((y[i * n + j] - acc).abs() < 1e-9);
            }
        }
    }
}
