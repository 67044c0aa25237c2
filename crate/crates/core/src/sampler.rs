//! Exact sampling of the Dirichlet GFF on `B_{N+1}`.
//!
//! The spectral sampler draws independent standard normals for each sine
//! mode, scales mode `(j, k)` by `(lambda_jk / 4)^{-1/2}` and maps back to
//! sites with the orthogonal 2D sine transform. Its covariance is exactly the
//! [`GreenTable`] of the killed discrete-time walk.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dst::DstScratch;
use crate::error::{Error, Result};
use crate::geometry::{BoxSpec, Site};
use crate::green::{GreenTable, Spectrum};
use crate::rng::{purpose, RngStream};

/// One realization of the field over `B_{N+1}` (zero on the pinned ring).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    bx: BoxSpec,
    values: Vec<f64>,
    stream: Option<RngStream>,
}

impl FieldSample {
    /// Wraps explicit values over full-box offsets; pinned sites are zeroed.
    pub fn from_values(bx: BoxSpec, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != bx.len() {
            return Err(Error::Domain(format!(
                "expected {} values, got {}",
                bx.len(),
                values.len()
            )));
        }
        for (o, v) in values.iter_mut().enumerate() {
            if bx.is_pinned(bx.site(o)) {
                *v = 0.0;
            }
        }
        Ok(FieldSample {
            bx,
            values,
            stream: None,
        })
    }

    /// Builds a field from a closure over free sites.
    pub fn from_fn(bx: BoxSpec, mut f: impl FnMut(Site) -> f64) -> Self {
        let values = (0..bx.len())
            .map(|o| {
                let s = bx.site(o);
                if bx.is_pinned(s) {
                    0.0
                } else {
                    f(s)
                }
            })
            .collect();
        FieldSample {
            bx,
            values,
            stream: None,
        }
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.bx
    }

    pub fn get(&self, s: Site) -> f64 {
        self.bx.offset(s).map_or(0.0, |o| self.values[o])
    }

    /// Values over full-box offsets.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stream(&self) -> Option<RngStream> {
        self.stream
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Reusable buffers for one sampling worker.
#[derive(Default)]
pub struct SamplerScratch {
    dst: DstScratch,
    transpose: Vec<f64>,
    modes: Vec<f64>,
}

#[derive(Debug)]
pub struct SpectralSampler {
    spectrum: Spectrum,
    /// Per-mode factor `sqrt(4 / lambda) * 2 / M`, row-major `(ky, jx)`.
    scale: Vec<f64>,
}

impl SpectralSampler {
    pub fn new(bx: BoxSpec) -> Self {
        let spectrum = Spectrum::new(bx);
        let n = bx.interior_side();
        let m = (n + 1) as f64;
        let scale = spectrum
            .lambdas()
            .iter()
            .map(|l| (4.0 / l).sqrt() * 2.0 / m)
            .collect();
        SpectralSampler { spectrum, scale }
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.spectrum.box_spec()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// One exact draw using the field substream of `stream`.
    pub fn sample(&self, stream: &RngStream) -> FieldSample {
        let mut scratch = SamplerScratch::default();
        self.sample_with(stream, &mut scratch)
    }

    pub fn sample_with(&self, stream: &RngStream, scratch: &mut SamplerScratch) -> FieldSample {
        let field_stream = stream.child(purpose::FIELD);
        let mut rng = field_stream.rng();
        let mut out = self.sample_rng(&mut rng, scratch);
        out.stream = Some(*stream);
        out
    }

    /// Draw using an explicit generator.
    pub fn sample_rng(&self, rng: &mut ChaCha8Rng, scratch: &mut SamplerScratch) -> FieldSample {
        let bx = self.box_spec();
        let n = bx.interior_side();
        let modes = &mut scratch.modes;
        modes.clear();
        modes.extend(self.scale.iter().map(|s| {
            let z: f64 = rng.sample(StandardNormal);
            s * z
        }));
        self.spectrum
            .transform()
            .forward_2d(modes, &mut scratch.dst, &mut scratch.transpose);
        let side = bx.side();
        let mut values = vec![0.0; bx.len()];
        for row in 0..n {
            let dst = &mut values[(row + 1) * side + 1..(row + 1) * side + 1 + n];
            dst.copy_from_slice(&modes[row * n..(row + 1) * n]);
        }
        FieldSample {
            bx,
            values,
            stream: None,
        }
    }

    /// Recovers the standard normals behind a field: inverse transform, then
    /// multiply mode `(j, k)` by `sqrt(lambda_jk / 4)`.
    pub fn whiten(&self, field: &FieldSample) -> Vec<f64> {
        let bx = self.box_spec();
        let n = bx.interior_side();
        let side = bx.side();
        let mut modes = Vec::with_capacity(n * n);
        for row in 0..n {
            modes.extend_from_slice(&field.values[(row + 1) * side + 1..(row + 1) * side + 1 + n]);
        }
        self.spectrum.transform().forward_2d(
            &mut modes,
            &mut DstScratch::default(),
            &mut Vec::new(),
        );
        // The 2D transform squares to (M / 2)^2, so (2 / M) S(phi) undoes the
        // synthesis up to the mode scaling.
        let m = (n + 1) as f64;
        for (c, l) in modes.iter_mut().zip(self.spectrum.lambdas()) {
            *c *= (l / 4.0).sqrt() * 2.0 / m;
        }
        modes
    }
}

/// Reference sampler `phi = L z` with `G = L L^T`.
#[derive(Debug)]
pub struct CholeskySampler {
    bx: BoxSpec,
    lower: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(table: &GreenTable) -> Result<Self> {
        let chol = table
            .as_matrix()
            .cholesky()
            .ok_or_else(|| Error::Solver("Green table is not positive definite".into()))?;
        Ok(CholeskySampler {
            bx: table.box_spec(),
            lower: chol.l(),
        })
    }

    pub fn sample(&self, stream: &RngStream) -> FieldSample {
        let mut rng = stream.child(purpose::FIELD).rng();
        let m = self.bx.interior_len();
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = vec![0.0; self.bx.len()];
        for i in 0..m {
            let row = self.lower.row(i);
            let v: f64 = (0..=i).map(|k| row[k] * z[k]).sum();
            values[self.bx.offset_unchecked(self.bx.interior_site(i))] = v;
        }
        FieldSample {
            bx: self.bx,
            values,
            stream: Some(*stream),
        }
    }
}

/// Samples the field conditioned on its value at the origin.
///
/// `phi | phi_0 = v` is `v g + (phi' - phi'_0 g)` with `g = G(., 0) / G(0, 0)`
/// and `phi'` an unconditioned draw.
#[derive(Debug)]
pub struct OriginConditioner {
    /// `G(., 0) / G(0, 0)` over full-box offsets.
    ratio: Vec<f64>,
    g00: f64,
}

impl OriginConditioner {
    pub fn new(sampler: &SpectralSampler) -> Self {
        let bx = sampler.box_spec();
        let col = sampler.spectrum().column(Site::ORIGIN);
        let g00 = col[bx.interior_offset(Site::ORIGIN).unwrap()];
        let mut ratio = vec![0.0; bx.len()];
        for (i, g) in col.iter().enumerate() {
            ratio[bx.offset_unchecked(bx.interior_site(i))] = g / g00;
        }
        OriginConditioner { ratio, g00 }
    }

    pub fn green_at_origin(&self) -> f64 {
        self.g00
    }

    /// `G(x, 0) / G(0, 0)` by full-box offset.
    pub fn ratio(&self) -> &[f64] {
        &self.ratio
    }

    pub fn condition(&self, mut field: FieldSample, v: f64) -> FieldSample {
        let o0 = field.bx.offset_unchecked(Site::ORIGIN);
        let shift = v - field.values[o0];
        for (x, r) in field.values.iter_mut().zip(&self.ratio) {
            *x += shift * r;
        }
        field.values[o0] = v;
        field
    }
}

/// Convenience: one draw conditioned on `phi_0 = v`.
pub fn sample_field_conditioned_origin(
    sampler: &SpectralSampler,
    conditioner: &OriginConditioner,
    v: f64,
    stream: &RngStream,
) -> FieldSample {
    conditioner.condition(sampler.sample(stream), v)
}

/// Convenience: one unconditioned draw.
pub fn sample_field(sampler: &SpectralSampler, stream: &RngStream) -> FieldSample {
    sampler.sample(stream)
}
