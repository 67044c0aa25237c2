use std::fmt;
use std::path::{Path, PathBuf};

use gfflab_core::overlay::DEFAULT_KAPPA;
use gfflab_core::percolation::circuit_radii;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    OneArmBulk,
    OneArmBoundary,
    Gap,
    Circuit,
    ChemDist,
    ConditionalArm,
    MartingaleAudit,
    PsiAudit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::OneArmBulk => "one-arm-bulk",
            Experiment::OneArmBoundary => "one-arm-boundary",
            Experiment::Gap => "gap",
            Experiment::Circuit => "circuit",
            Experiment::ChemDist => "chem-dist",
            Experiment::ConditionalArm => "conditional-arm",
            Experiment::MartingaleAudit => "martingale-audit",
            Experiment::PsiAudit => "psi-audit",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[default]
    Discrete,
    Metric,
    Coupled,
}

/// Experiment configuration, read from TOML.
///
/// `workers` and `out` only affect where and how fast the run happens, so
/// they are left out of the provenance echo stored in each record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub n: Vec<u32>,
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub mode: ModeSpec,
    pub replicas: u64,
    #[serde(default)]
    pub replica_start: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Conditioning offsets for `conditional-arm`: `φ_0 = h + x sqrt(log N)`.
    #[serde(default)]
    pub x: Vec<f64>,
    /// Number of consecutive seeds audited by `martingale-audit`.
    #[serde(default = "default_audit_seeds")]
    pub audit_seeds: u32,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

fn default_r() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    0.25
}
fn default_beta() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    0.5
}
fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}
fn default_audit_seeds() -> u32 {
    3
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl ExperimentConfig {
    /// Minimal config for `experiment` with everything else defaulted.
    pub fn new(experiment: Experiment, replicas: u64) -> Self {
        ExperimentConfig {
            experiment: Some(experiment),
            n: Vec::new(),
            h: Vec::new(),
            r: default_r(),
            alpha: default_alpha(),
            beta: default_beta(),
            gamma: default_gamma(),
            mode: ModeSpec::Discrete,
            replicas,
            replica_start: 0,
            seed: 0,
            kappa: default_kappa(),
            x: Vec::new(),
            audit_seeds: default_audit_seeds(),
            workers: None,
            out: None,
        }
    }

    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if let Some(e) = self.experiment {
            if e != experiment {
                return bad(format!(
                    "config is for `{e}` but `{experiment}` was requested"
                ));
            }
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.replica_start.checked_add(self.replicas).is_none() {
            return bad("replica range overflows".into());
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if experiment == Experiment::PsiAudit {
            return Ok(());
        }
        if self.n.is_empty() {
            return bad("n list is empty".into());
        }
        if self.h.is_empty() {
            return bad("h list is empty".into());
        }
        if let Some(h) = self.h.iter().find(|h| !h.is_finite()) {
            return bad(format!("non-finite level {h}"));
        }
        if let Some(n) = self.n.iter().find(|&&n| !(2..=4096).contains(&n)) {
            return bad(format!("N = {n} outside [2, 4096]"));
        }
        let needs_r = matches!(
            experiment,
            Experiment::OneArmBulk | Experiment::Gap | Experiment::ConditionalArm
        );
        if needs_r && !(self.r > 0.0 && self.r <= 0.5) {
            return bad(format!("r = {} not in (0, 1/2]", self.r));
        }
        let discrete_only = matches!(
            experiment,
            Experiment::Circuit | Experiment::ChemDist | Experiment::MartingaleAudit
        );
        if discrete_only && self.mode != ModeSpec::Discrete {
            return bad(format!("`{experiment}` runs in discrete mode only"));
        }
        match experiment {
            Experiment::Circuit => {
                for &n in &self.n {
                    circuit_radii(n, self.alpha, self.beta)
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                }
            }
            Experiment::ChemDist => {
                if !(self.alpha > 0.0
                    && self.alpha < self.beta
                    && self.beta <= self.gamma
                    && self.gamma < 1.0)
                {
                    return bad(format!(
                        "chem-dist needs 0 < alpha < beta <= gamma < 1, got ({}, {}, {})",
                        self.alpha, self.beta, self.gamma
                    ));
                }
                for &n in &self.n {
                    let (a, b) = (self.alpha * n as f64, self.beta * n as f64);
                    if a.floor() < 1.0 || b.floor() <= a.floor() {
                        return bad(format!("chem-dist radii degenerate for N = {n}"));
                    }
                }
            }
            Experiment::ConditionalArm => {
                if self.x.is_empty() {
                    return bad("conditional-arm needs a non-empty x list".into());
                }
                if let Some(x) = self.x.iter().find(|x| !x.is_finite()) {
                    return bad(format!("non-finite offset {x}"));
                }
            }
            Experiment::MartingaleAudit => {
                if let Some(n) = self.n.iter().find(|&&n| n < 8) {
                    return bad(format!("martingale-audit needs N >= 8, got {n}"));
                }
                if self.audit_seeds == 0 {
                    return bad("audit_seeds must be at least 1".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}
