use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{Experiment, ExperimentConfig};
use crate::engine::thread_pool;
use crate::error::{HarnessError, Result};
use crate::experiments::resume_experiment;
use crate::record::{parse_records, EstimateRecord};

pub const WORKERS_ENV: &str = "GFFLAB_WORKERS";

/// Worker count: flag, then environment, then config, then 1.
pub fn resolve_workers(
    flag: Option<usize>,
    env: Option<&str>,
    cfg: &ExperimentConfig,
) -> Result<usize> {
    let from_env = match env {
        Some(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| HarnessError::Config(format!("{WORKERS_ENV}={v} is not a count")))?,
        ),
        None => None,
    };
    let w = flag.or(from_env).or(cfg.workers).unwrap_or(1);
    if w == 0 {
        return Err(HarnessError::Config("workers must be at least 1".into()));
    }
    Ok(w)
}

/// Sidecar file holding per-unit wall times.
pub fn timing_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".timing.jsonl");
    PathBuf::from(s)
}

/// Loads the complete records already in `path`, truncating a trailing
/// partial line left by an interrupted write.
pub fn load_existing(path: &Path) -> Result<Vec<EstimateRecord>> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::io(path, e)),
    };
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        let f = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| HarnessError::io(path, e))?;
        f.set_len(keep as u64)
            .map_err(|e| HarnessError::io(path, e))?;
    }
    let text = std::str::from_utf8(&bytes[..keep])
        .map_err(|e| HarnessError::Other(format!("{}: not UTF-8: {e}", path.display())))?;
    parse_records(text)
}

/// Runs `exp`, appending records for units not yet present in `out`.
pub fn simulate(
    cfg: &ExperimentConfig,
    exp: Experiment,
    workers: usize,
    out: &Path,
) -> Result<usize> {
    cfg.validate(exp)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let existing = load_existing(out)?;
    let pool = thread_pool(workers)?;
    let open = |p: &Path| -> Result<File> {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .map_err(|e| HarnessError::io(p, e))
    };
    let mut file = open(out)?;
    let tpath = timing_path(out);
    let mut timing = open(&tpath)?;
    let mut written = 0;
    resume_experiment(cfg, exp, &pool, &existing, |unit, recs, secs| {
        let mut buf = String::new();
        for r in &recs {
            buf.push_str(&r.to_line());
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())
            .map_err(|e| HarnessError::io(out, e))?;
        file.flush().map_err(|e| HarnessError::io(out, e))?;
        let line = serde_json::json!({
            "experiment": exp.name(),
            "unit": unit.label,
            "records": recs.len(),
            "wall_seconds": secs,
            "workers": workers,
        });
        writeln!(timing, "{line}").map_err(|e| HarnessError::io(&tpath, e))?;
        written += recs.len();
        Ok(())
    })?;
    Ok(written)
}
