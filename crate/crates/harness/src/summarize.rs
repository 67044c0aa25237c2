use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::record::{parse_records, EstimateRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub experiment: String,
    pub event: String,
    pub n: u32,
    pub h: f64,
    pub mode: String,
    pub seed: u64,
    pub replicas: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub log_n: f64,
    pub p_sqrt_log_n: f64,
    pub log_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub experiment: String,
    pub event: String,
    pub h: f64,
    pub mode: String,
    pub points: usize,
    /// Ordinary least squares of `log p̂` on `log N`.
    pub slope: f64,
    /// Residual-based standard error (needs three or more points).
    pub se: Option<f64>,
    /// Weighted by the binomial variance `(1 - p) / (n p)` of `log p̂`.
    pub slope_weighted: f64,
    pub se_weighted: f64,
}

pub struct Summary {
    pub estimates: Vec<EstimateRow>,
    pub slopes: Vec<SlopeRow>,
}

/// Least-squares fit `y = a + b x`; returns `(b, se_b)` with `se_b` from
/// the residuals, `None` below three points.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<(f64, Option<f64>)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let se = (n > 2).then(|| {
        let a = my - b * mx;
        let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    });
    Some((b, se))
}

/// Weighted fit with known variances `var`; returns `(b, se_b)`.
pub fn wls_slope(x: &[f64], y: &[f64], var: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 || var.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return None;
    }
    let w: Vec<f64> = var.iter().map(|v| 1.0 / v).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = w
        .iter()
        .zip(x)
        .zip(y)
        .map(|((w, x), y)| w * (x - mx) * (y - my))
        .sum();
    Some((sxy / sxx, (1.0 / sxx).sqrt()))
}

pub fn summarize_records(records: &[EstimateRecord]) -> Summary {
    let estimates: Vec<EstimateRow> = records
        .iter()
        .map(|r| {
            let log_n = (r.n as f64).ln();
            EstimateRow {
                experiment: r.experiment.clone(),
                event: r.event.clone(),
                n: r.n,
                h: r.h,
                mode: r.mode.clone(),
                seed: r.seed,
                replicas: r.replicas,
                successes: r.successes,
                p_hat: r.p_hat,
                se: r.se,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                log_n,
                p_sqrt_log_n: r.p_hat * log_n.max(0.0).sqrt(),
                log_p: (r.p_hat > 0.0).then(|| r.p_hat.ln()),
            }
        })
        .collect();
    let mut groups: BTreeMap<(String, String, u64, String), Vec<&EstimateRecord>> = BTreeMap::new();
    for r in records {
        if r.n > 1 && r.p_hat > 0.0 && r.replicas > 0 {
            groups
                .entry((
                    r.experiment.clone(),
                    r.event.clone(),
                    r.h.to_bits(),
                    r.mode.clone(),
                ))
                .or_default()
                .push(r);
        }
    }
    let mut slopes = Vec::new();
    for ((experiment, event, h, mode), rs) in groups {
        let x: Vec<f64> = rs.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rs.iter().map(|r| r.p_hat.ln()).collect();
        let var: Vec<f64> = rs
            .iter()
            .map(|r| (1.0 - r.p_hat) / (r.replicas as f64 * r.p_hat))
            .collect();
        let Some((slope, se)) = ols_slope(&x, &y) else {
            continue;
        };
        // Exact data gives zero binomial variance; fall back to equal weights.
        let (slope_weighted, se_weighted) = wls_slope(&x, &y, &var).unwrap_or((slope, 0.0));
        slopes.push(SlopeRow {
            experiment,
            event,
            h: f64::from_bits(h),
            mode,
            points: rs.len(),
            slope,
            se,
            slope_weighted,
            se_weighted,
        });
    }
    Summary { estimates, slopes }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => HarnessError::io(path, e),
        other => HarnessError::Other(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_path(path)
        .map_err(io)?;
    if rows.is_empty() {
        w.write_record(header).map_err(io)?;
    }
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

const ESTIMATE_HEADER: &[&str] = &[
    "experiment",
    "event",
    "n",
    "h",
    "mode",
    "seed",
    "replicas",
    "successes",
    "p_hat",
    "se",
    "ci_low",
    "ci_high",
    "log_n",
    "p_sqrt_log_n",
    "log_p",
];
const SLOPE_HEADER: &[&str] = &[
    "experiment",
    "event",
    "h",
    "mode",
    "points",
    "slope",
    "se",
    "slope_weighted",
    "se_weighted",
];

/// Reads `input` (JSONL) and writes `estimates.csv` and `slopes.csv` into
/// the directory `out`. Returns the summary.
pub fn summarize(input: &Path, out: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(input).map_err(|e| HarnessError::io(input, e))?;
    let records = parse_records(&text)?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let s = summarize_records(&records);
    write_csv(&out.join("estimates.csv"), &s.estimates, ESTIMATE_HEADER)?;
    write_csv(&out.join("slopes.csv"), &s.slopes, SLOPE_HEADER)?;
    Ok(s)
}
