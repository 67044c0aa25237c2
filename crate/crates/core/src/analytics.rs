//! Closed-form references: Gaussian tails, the line-crossing law of Brownian
//! motion, the exact connection probability and the predicted envelopes.

// NaN inputs must fail the argument guards, so the negated comparisons stay.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{spawn_replica_stream, RngStream};

/// `Φ̄(s) = P[Z > s]` for a standard normal `Z`.
pub fn gaussian_upper_tail(s: f64) -> f64 {
    0.5 * libm::erfc(s / std::f64::consts::SQRT_2)
}

/// `ln Φ̄(s)`, finite far into the upper tail.
pub fn log_gaussian_upper_tail(s: f64) -> f64 {
    if s < 30.0 {
        return gaussian_upper_tail(s).ln();
    }
    // Asymptotic series of the Mills ratio; the first omitted term is below
    // 1e-13 relative at s = 30.
    let z = 1.0 / (s * s);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=6 {
        term *= -((2 * k - 1) as f64) * z;
        sum += term;
    }
    -0.5 * s * s - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + sum.ln()
}

/// Line `t -> m t - b` and horizon `T` of the barrier problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiParams {
    pub m: f64,
    pub b: f64,
    pub t: f64,
}

impl PsiParams {
    pub fn new(m: f64, b: f64, t: f64) -> Result<Self> {
        if !(b > 0.0 && t > 0.0) || !m.is_finite() || !b.is_finite() || !t.is_finite() {
            return Err(Error::Domain(format!(
                "psi needs b > 0, T > 0, got b = {b}, T = {t}"
            )));
        }
        Ok(PsiParams { m, b, t })
    }
}

/// `ψ(m, b, T) = Φ̄(m√T − b/√T) − e^{2bm} Φ̄(m√T + b/√T)`, the probability
/// that a standard Brownian motion stays above `mt − b` on `[0, T]`.
pub fn psi(p: PsiParams) -> f64 {
    let st = p.t.sqrt();
    let first = gaussian_upper_tail(p.m * st - p.b / st);
    let second = (2.0 * p.b * p.m + log_gaussian_upper_tail(p.m * st + p.b / st)).exp();
    (first - second).clamp(0.0, 1.0)
}

/// `a ∇ b = (a ∨ b) ∧ 1`.
pub fn nabla(a: f64, b: f64) -> f64 {
    a.max(b).min(1.0)
}

/// Constants of the two-sided bound for `m > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiConstants {
    /// Rate in the lower envelope.
    pub c: f64,
    /// Rate in the upper envelope.
    pub c_prime: f64,
}

impl Default for PsiConstants {
    fn default() -> Self {
        PsiConstants {
            c: 1.0,
            c_prime: 0.5,
        }
    }
}

/// Envelope expressions bracketing `ψ` up to constant factors:
/// `b e^{-c m² T}/√T` and `b e^{-c' m² T}/√T` when `m > 0` and `b <= √T`;
/// `|mb| ∇ b/√T` (both sides) when `m <= 0`.
pub fn psi_envelopes(p: PsiParams, k: PsiConstants) -> Result<(f64, f64)> {
    let st = p.t.sqrt();
    if p.m <= 0.0 {
        let v = nabla((p.m * p.b).abs(), p.b / st);
        return Ok((v, v));
    }
    if p.b > st {
        return Err(Error::Domain(format!(
            "m > 0 envelope needs b <= sqrt(T), got b = {}, T = {}",
            p.b, p.t
        )));
    }
    let base = p.b / st;
    let m2t = p.m * p.m * p.t;
    Ok((base * (-k.c * m2t).exp(), base * (-k.c_prime * m2t).exp()))
}

/// `P[0 <-> ∂B_N]` in the metric graph for `h < 0`:
/// `1 - 2 Φ̄(|h| / sqrt(G(0,0)))`.
pub fn exact_connection_oracle(h: f64, green_at_origin: f64) -> Result<f64> {
    if !(h < 0.0) {
        return Err(Error::Domain(format!(
            "exact connection formula needs h < 0, got {h}"
        )));
    }
    if !(green_at_origin > 0.0) {
        return Err(Error::Domain(
            "Green's function at the origin must be positive".into(),
        ));
    }
    Ok(1.0 - 2.0 * gaussian_upper_tail(-h / green_at_origin.sqrt()))
}

/// Monte Carlo survival estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub replicas: u64,
    pub successes: u64,
    pub p: f64,
    pub se: f64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, replicas: u64) -> Self {
        let p = if replicas == 0 {
            0.0
        } else {
            successes as f64 / replicas as f64
        };
        let se = if replicas == 0 {
            0.0
        } else {
            (p * (1.0 - p) / replicas as f64).sqrt()
        };
        McEstimate {
            replicas,
            successes,
            p,
            se,
        }
    }
}

/// Default grid resolution per unit time.
pub const STEPS_PER_UNIT_TIME: f64 = 64.0;

/// Simulates `B` on `steps` grid intervals of `[0, T]` and, on each interval
/// whose endpoints lie above the line, kills the path with the probability
/// `exp(-2 x0 x1 / dt)` that the bridge between the gaps `x0, x1` dips below
/// it. The scheme is exact in law for any step count.
pub fn brownian_line_hitting_mc(
    p: PsiParams,
    steps: usize,
    replicas: u64,
    stream: &RngStream,
) -> McEstimate {
    assert!(steps > 0, "need at least one step");
    let dt = p.t / steps as f64;
    let sd = dt.sqrt();
    let mut successes = 0;
    for i in 0..replicas {
        let mut rng = spawn_replica_stream(stream, i).rng();
        // Gap between the path and the line, a Brownian motion with drift -m.
        let mut x = p.b;
        let mut alive = true;
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            let next = x + sd * z - p.m * dt;
            let u: f64 = rng.gen();
            if next <= 0.0 || u < (-2.0 * x * next / dt).exp() {
                alive = false;
                break;
            }
            x = next;
        }
        successes += alive as u64;
    }
    McEstimate::from_counts(successes, replicas)
}

/// Step count for horizon `T` at the default resolution.
pub fn default_steps(t: f64) -> usize {
    (STEPS_PER_UNIT_TIME * t).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeKind {
    /// Lower bound on `g_{N,r}^h(x)`.
    GLower,
    /// Upper bound on `g_{N,r}^h(x)`.
    GUpper,
    /// `η_N^{h,ρ}`.
    Eta,
    /// `η̃_{N,k}^{h,ρ}`.
    EtaTilde,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub h: f64,
    pub n: f64,
    /// Radius fraction `r` for the `g` envelopes.
    pub r: f64,
    /// Radius `k` for `η̃`.
    pub k: f64,
    /// Conditioning offset `x` for the `g` envelopes.
    pub x: f64,
    /// Exponential rate (`c`, `c'` or `ρ` depending on the kind).
    pub rho: f64,
    /// Range constant: for `h > 0` the `g` envelopes need
    /// `x <= c'' sqrt(log N) |log r|^{-1/2}`.
    pub x_range: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        EnvelopeParams {
            h: 0.0,
            n: 64.0,
            r: 0.5,
            k: 32.0,
            x: 1.0,
            rho: 1.0,
            x_range: 1.0,
        }
    }
}

pub fn envelope(kind: EnvelopeKind, p: &EnvelopeParams) -> Result<f64> {
    if !(p.n > 1.0) {
        return Err(Error::Domain(format!("envelope needs N > 1, got {}", p.n)));
    }
    if !(p.rho >= 0.0) {
        return Err(Error::Domain(format!("negative rate {}", p.rho)));
    }
    let log_n = p.n.ln();
    match kind {
        EnvelopeKind::GLower | EnvelopeKind::GUpper => {
            if !(p.r > 0.0 && p.r <= 0.5) {
                return Err(Error::Domain(format!("r = {} not in (0, 1/2]", p.r)));
            }
            if !(p.x > 0.0) {
                return Err(Error::Domain(format!("x = {} must be positive", p.x)));
            }
            let log_r = p.r.ln().abs();
            if p.h <= 0.0 {
                Ok(nabla(
                    p.x * p.h.abs() / log_n.sqrt(),
                    p.x * log_r.sqrt() / log_n.sqrt(),
                ))
            } else {
                if p.x > p.x_range * log_n.sqrt() / log_r.sqrt() {
                    return Err(Error::Domain(format!(
                        "x = {} outside the h > 0 range",
                        p.x
                    )));
                }
                let k2 = p.h * p.h / log_r;
                Ok(p.x * (-p.rho * k2).exp() * (log_r / log_n).sqrt())
            }
        }
        EnvelopeKind::Eta => {
            let v = if p.h <= 0.0 {
                p.h.abs().max(1.0) / log_n.sqrt()
            } else {
                (-p.rho * p.h * p.h).exp() / log_n.sqrt()
            };
            Ok(v.min(1.0))
        }
        EnvelopeKind::EtaTilde => {
            if !(p.k >= 1.0 && p.k < p.n) {
                return Err(Error::Domain(format!("k = {} not in [1, N)", p.k)));
            }
            let gap = log_n - p.k.ln();
            let v = if p.h <= 0.0 {
                p.h.abs().max(gap.sqrt()) / log_n.sqrt()
            } else {
                (gap / log_n).sqrt() * (-p.rho * p.h * p.h / gap).exp()
            };
            Ok(v.min(1.0))
        }
    }
}

/// `K = h |log r|^{-1/2}`.
pub fn k_parameter(h: f64, r: f64) -> f64 {
    h / r.ln().abs().sqrt()
}

/// `ξ_N^h = (φ_0 − h) / sqrt(log N)`.
pub fn xi_normalized(phi0: f64, h: f64, n: f64) -> f64 {
    (phi0 - h) / n.ln().sqrt()
}
