use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gfflab_harness::engine::thread_pool;
use gfflab_harness::experiments::run_experiment;
use gfflab_harness::record::{parse_records, EstimateRecord, RecordMeta};
use gfflab_harness::{Experiment, ExperimentConfig};

fn gfflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfflab"))
        .args(args)
        .env_remove("GFFLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn simulate(exp: &str, cfg: &Path, out: &Path, workers: &str) -> Output {
    gfflab(&[
        "simulate",
        exp,
        "--config",
        cfg.to_str().unwrap(),
        "--workers",
        workers,
        "--out",
        out.to_str().unwrap(),
    ])
}

fn records(path: &Path) -> Vec<EstimateRecord> {
    parse_records(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const BULK: &str = "n = [12, 20]\nh = [0.0, -0.5]\nmode = \"coupled\"\nreplicas = 600\nseed = 9\n";

#[test]
fn output_is_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", BULK);
    let (a, b, c) = (
        dir.path().join("a.jsonl"),
        dir.path().join("b.jsonl"),
        dir.path().join("c.jsonl"),
    );
    assert!(simulate("one-arm-bulk", &cfg, &a, "1").status.success());
    assert!(simulate("one-arm-bulk", &cfg, &b, "1").status.success());
    assert!(simulate("one-arm-bulk", &cfg, &c, "4").status.success());
    let bytes = std::fs::read(&a).unwrap();
    assert!(!bytes.is_empty());
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes, std::fs::read(&c).unwrap());
    assert!(dir.path().join("a.jsonl.timing.jsonl").exists());
}

#[test]
fn workers_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", BULK);
    let out = dir.path().join("o.jsonl");
    let st = Command::new(env!("CARGO_BIN_EXE_gfflab"))
        .args([
            "simulate",
            "one-arm-bulk",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .env("GFFLAB_WORKERS", "nope")
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.jsonl");
    let zero = write(dir.path(), "z.toml", "n = [16]\nh = [0.0]\nreplicas = 0\n");
    let o = simulate("one-arm-bulk", &zero, &out, "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicas"));
    let unknown = write(
        dir.path(),
        "u.toml",
        "n = [16]\nh = [0.0]\nreplicas = 3\ncolour = 1\n",
    );
    assert_eq!(
        simulate("circuit", &unknown, &out, "1").status.code(),
        Some(2)
    );
    assert!(!out.exists());
}

#[test]
fn io_errors_exit_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let o = simulate("circuit", &missing, &dir.path().join("o.jsonl"), "1");
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));
}

#[test]
fn coupled_metric_never_beats_discrete() {
    let mut cfg = ExperimentConfig::new(Experiment::OneArmBulk, 10_000);
    cfg.n = vec![32];
    cfg.h = vec![-0.5];
    cfg.mode = gfflab_harness::ModeSpec::Coupled;
    cfg.seed = 77;
    let recs = run_experiment(&cfg, Experiment::OneArmBulk, &thread_pool(1).unwrap()).unwrap();
    let get = |mode: &str| recs.iter().find(|r| r.mode == mode).unwrap();
    let (d, m) = (get("discrete"), get("metric"));
    assert!(
        m.successes <= d.successes,
        "{} > {}",
        m.successes,
        d.successes
    );
    assert_eq!(get("coupled").successes, 0);
}

#[test]
fn resume_appends_only_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", BULK);
    let full = dir.path().join("full.jsonl");
    assert!(simulate("one-arm-bulk", &cfg, &full, "1").status.success());
    let bytes = std::fs::read(&full).unwrap();

    // Rerunning a finished file adds nothing.
    assert!(simulate("one-arm-bulk", &cfg, &full, "2").status.success());
    assert_eq!(std::fs::read(&full).unwrap(), bytes);

    // Interrupted in the middle of the second unit, inside a line.
    let text = String::from_utf8(bytes.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let first_unit = lines.iter().take_while(|l| l.contains("\"n\":12,")).count();
    let mut cut = lines[..first_unit + 1].join("\n");
    cut.push('\n');
    cut.push_str(&lines[first_unit + 1][..40]);
    let part = dir.path().join("part.jsonl");
    std::fs::write(&part, &cut).unwrap();
    assert!(simulate("one-arm-bulk", &cfg, &part, "3").status.success());
    let resumed = records(&part);
    let mut keys: Vec<_> = resumed.iter().map(|r| r.key()).collect();
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n, "duplicate cells after resume");
    let mut want = records(&full);
    let mut got = resumed;
    want.sort_by_key(|r| r.key());
    got.sort_by_key(|r| r.key());
    assert_eq!(got, want);
}

#[test]
fn records_reproduce_from_their_embedded_config() {
    let mut cfg = ExperimentConfig::new(Experiment::Circuit, 400);
    cfg.n = vec![24];
    cfg.h = vec![0.0];
    cfg.seed = 4;
    cfg.replica_start = 100;
    let pool = thread_pool(2).unwrap();
    let recs = run_experiment(&cfg, Experiment::Circuit, &pool).unwrap();
    let r = &recs[0];
    let mut again = r.config.clone();
    again.seed = r.seed;
    let rerun = run_experiment(&again, Experiment::Circuit, &thread_pool(1).unwrap()).unwrap();
    assert_eq!(rerun[0].successes, r.successes);
    assert_eq!((r.replica_start, r.replica_end), (100, 500));
}

#[test]
fn circuit_emits_one_record_per_box() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "n = [64]\nh = [0.0]\nalpha = 0.25\nbeta = 0.5\nreplicas = 200\n",
    );
    let out = dir.path().join("o.jsonl");
    assert!(simulate("circuit", &cfg, &out, "1").status.success());
    let recs = records(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].n, 64);
    assert_eq!(recs[0].extras["inner_radius"], 16.0);
}

#[test]
fn boundary_records_carry_the_oracle() {
    let mut cfg = ExperimentConfig::new(Experiment::OneArmBoundary, 300);
    cfg.n = vec![16];
    cfg.h = vec![-0.5, 0.5];
    cfg.mode = gfflab_harness::ModeSpec::Metric;
    let recs = run_experiment(&cfg, Experiment::OneArmBoundary, &thread_pool(1).unwrap()).unwrap();
    assert_eq!(recs.len(), 4);
    for r in &recs {
        assert_eq!(r.extras.contains_key("oracle"), r.h < 0.0, "{}", r.event);
    }
    let g00 = recs[0].extras["green_origin"];
    let want = 1.0 - 2.0 * gfflab_core::analytics::gaussian_upper_tail(0.5 / g00.sqrt());
    assert!((recs[0].extras["oracle"] - want).abs() < 1e-15);
}

#[test]
fn gap_records_report_both_modes() {
    let mut cfg = ExperimentConfig::new(Experiment::Gap, 500);
    cfg.n = vec![16];
    cfg.h = vec![0.0];
    let recs = run_experiment(&cfg, Experiment::Gap, &thread_pool(1).unwrap()).unwrap();
    let gap = recs.iter().find(|r| r.event.starts_with("gap_")).unwrap();
    for k in [
        "p_disc",
        "p_metric",
        "diff",
        "pooled_se",
        "se_paired",
        "normalized_gap",
    ] {
        assert!(gap.extras.contains_key(k), "{k}");
    }
    let e = &gap.extras;
    assert!((e["diff"] - (e["p_disc"] - e["p_metric"])).abs() < 1e-15);
    assert!(e["pooled_se"] >= e["se_paired"] - 1e-15);
}

#[test]
fn summarize_empty_input_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "empty.jsonl", "");
    let out = dir.path().join("sum");
    let o = gfflab(&[
        "summarize",
        "--in",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let est = std::fs::read_to_string(out.join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 1);
    assert!(est.starts_with("experiment,event,n,"));
}

#[test]
fn summarize_rejects_malformed_lines_with_their_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(Experiment::Circuit, 10);
    let meta = RecordMeta {
        experiment: "circuit",
        n: 32,
        seed: 0,
        replica_start: 0,
        replica_end: 10,
        config: &cfg,
    };
    let good = EstimateRecord::new(&meta, "circuit", 0.0, "discrete", 3, 10).to_line();
    let input = write(
        dir.path(),
        "bad.jsonl",
        &format!("{good}\n{good}\n{{\"n\": 3\n"),
    );
    let o = gfflab(&[
        "summarize",
        "--in",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn summarize_recovers_a_planted_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(Experiment::OneArmBoundary, 1_000_000);
    let mut text = String::new();
    for n in [32u32, 64, 128, 256] {
        let meta = RecordMeta {
            experiment: "one-arm-boundary",
            n,
            seed: 0,
            replica_start: 0,
            replica_end: 1_000_000,
            config: &cfg,
        };
        let mut r = EstimateRecord::new(&meta, "arm_boundary_inner", 0.5, "metric", 1, 1_000_000);
        r.p_hat = 0.3 * (n as f64).powf(-0.4);
        text.push_str(&r.to_line());
        text.push('\n');
    }
    let input = write(dir.path(), "line.jsonl", &text);
    let s = gfflab_harness::summarize::summarize(&input, &dir.path().join("s")).unwrap();
    assert_eq!(s.slopes.len(), 1);
    assert!(
        (s.slopes[0].slope + 0.4).abs() < 1e-12,
        "{}",
        s.slopes[0].slope
    );
    let csv = std::fs::read_to_string(dir.path().join("s/slopes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn boundary_arm_slope_is_negative_above_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.toml",
        "n = [8, 16, 32]\nh = [0.5]\nmode = \"metric\"\nreplicas = 20000\nseed = 3\n",
    );
    let out = dir.path().join("b.jsonl");
    assert!(simulate("one-arm-boundary", &cfg, &out, "2")
        .status
        .success());
    let s = gfflab_harness::summarize::summarize(&out, &dir.path().join("s")).unwrap();
    let row = s
        .slopes
        .iter()
        .find(|r| r.event == "arm_boundary_inner")
        .unwrap();
    assert!(row.slope_weighted < 0.0 && row.se_weighted > 0.0, "{row:?}");
    assert!(row.slope_weighted + 2.0 * row.se_weighted < 0.0, "{row:?}");
}
