use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 97.5% standard normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval at 95%.
pub fn wilson(successes: u64, replicas: u64) -> (f64, f64) {
    if replicas == 0 {
        return (0.0, 1.0);
    }
    let n = replicas as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes == replicas {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// One Monte Carlo estimate. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRecord {
    pub experiment: String,
    pub event: String,
    pub n: u32,
    pub h: f64,
    pub mode: String,
    pub replicas: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub kappa: f64,
    pub replica_start: u64,
    pub replica_end: u64,
    pub version: String,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub extras: BTreeMap<String, f64>,
}

/// Identity of a cell for resume bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub experiment: String,
    pub event: String,
    pub n: u32,
    pub h_bits: u64,
    pub mode: String,
    pub seed: u64,
    pub replica_start: u64,
    pub replica_end: u64,
}

pub struct RecordMeta<'a> {
    pub experiment: &'a str,
    pub n: u32,
    pub seed: u64,
    pub replica_start: u64,
    pub replica_end: u64,
    pub config: &'a ExperimentConfig,
}

impl EstimateRecord {
    pub fn new(
        meta: &RecordMeta<'_>,
        event: impl Into<String>,
        h: f64,
        mode: &str,
        successes: u64,
        replicas: u64,
    ) -> Self {
        assert!(successes <= replicas, "successes exceed replicas");
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
        let (lo, hi) = wilson(successes, replicas);
        EstimateRecord {
            experiment: meta.experiment.to_string(),
            event: event.into(),
            n: meta.n,
            h,
            mode: mode.to_string(),
            replicas,
            successes,
            p_hat: p,
            se,
            ci_low: lo,
            ci_high: hi,
            seed: meta.seed,
            kappa: meta.config.kappa,
            replica_start: meta.replica_start,
            replica_end: meta.replica_end,
            version: VERSION.to_string(),
            config: meta.config.clone(),
            extras: BTreeMap::new(),
        }
    }

    pub fn extra(mut self, key: &str, value: f64) -> Self {
        if value.is_finite() {
            self.extras.insert(key.to_string(), value);
        }
        self
    }

    pub fn key(&self) -> CellKey {
        CellKey {
            experiment: self.experiment.clone(),
            event: self.event.clone(),
            n: self.n,
            h_bits: self.h.to_bits(),
            mode: self.mode.clone(),
            seed: self.seed,
            replica_start: self.replica_start,
            replica_end: self.replica_end,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.successes > self.replicas {
            return Err(format!(
                "successes {} exceed replicas {}",
                self.successes, self.replicas
            ));
        }
        if !(0.0..=1.0).contains(&self.ci_low)
            || !(0.0..=1.0).contains(&self.ci_high)
            || self.ci_low > self.ci_high
        {
            return Err("interval outside [0, 1]".into());
        }
        // Conditioned sub-populations count fewer replicas than their range.
        if self.replica_end < self.replica_start
            || self.replica_end - self.replica_start < self.replicas
        {
            return Err("replica range shorter than the replica count".into());
        }
        Ok(())
    }
}

/// Parses one JSONL line; `line` is 1-based and only used in errors.
pub fn parse_record_line(text: &str, line: usize) -> Result<EstimateRecord> {
    let rec: EstimateRecord = serde_json::from_str(text).map_err(|e| HarnessError::Record {
        line,
        msg: e.to_string(),
    })?;
    rec.check()
        .map_err(|msg| HarnessError::Record { line, msg })?;
    Ok(rec)
}

/// Parses a whole JSONL document, skipping blank lines.
pub fn parse_records(text: &str) -> Result<Vec<EstimateRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record_line(l, i + 1))
        .collect()
}
