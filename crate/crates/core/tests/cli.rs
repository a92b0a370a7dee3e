//! End-to-end checks of the `mmcast` binary: outputs, exit codes and
//! reproducibility.

use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"{
    "name": "small",
    "n_tx": 4, "n_rx": 2, "n_rf": 2, "K": 4, "G": 2,
    "gamma_db": 3, "n_iter": 1, "n_rand": 10,
    "n_realizations": 3, "master_seed": 5, "mode": "both",
    "sweep": [{"axis": "n_rf", "values": [2, 4]}]
}"#;

fn mmcast(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mmcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn sweep_writes_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = mmcast(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let runs = read(&out, "runs.csv");
    let mut lines = runs.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_point,realization,seed,mode,n_packets,p_tx_dbm,mask,wall_time_s"
    );
    // 2 points × 3 realizations × 2 modes.
    assert_eq!(lines.count(), 12);
    assert!(!runs.contains('\r'));
    let agg = read(&out, "aggregate.csv");
    assert_eq!(agg.lines().count(), 1 + 4);
    assert!(read(&out, "points.csv").contains("small[n_rf=4]"));
    assert!(read(&out, "config.json").contains("\"n_tx\": 4"));
    assert!(!out.join("failures.csv").exists());
}

#[test]
fn run_ignores_sweep_axes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = mmcast(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "digital",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let runs = read(&out, "runs.csv");
    assert_eq!(runs.lines().count(), 1 + 3);
    assert!(runs.lines().skip(1).all(|l| l.contains(",digital,")));
}

#[test]
fn repeated_runs_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let res = mmcast(&[
            "sweep",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert_eq!(res.status.code(), Some(0));
    }
    for name in ["runs.csv", "aggregate.csv", "points.csv", "config.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        mmcast(&["run", "--config", &cfg, "--out", a.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        mmcast(&[
            "run",
            "--config",
            &cfg,
            "--out",
            b.to_str().unwrap(),
            "--seed",
            "6"
        ])
        .status
        .code(),
        Some(0)
    );
    assert_ne!(read(&a, "runs.csv"), read(&b, "runs.csv"));
    assert!(read(&b, "config.json").contains("\"master_seed\": 6"));
}

#[test]
fn correlation_histogram_and_beam_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let res = mmcast(&[
        "corrhist", "--preset", "fig4", "--desk", "--out", o, "--bins", "10",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let hist = read(&out, "correlation_histogram.csv");
    assert_eq!(
        hist.lines().next().unwrap(),
        "bin_low,bin_high,intra_prob,inter_prob"
    );
    assert_eq!(hist.lines().count(), 11);

    let res = mmcast(&[
        "beampattern",
        "--preset",
        "fig5",
        "--out",
        o,
        "--grid-points",
        "181",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for g in 0..4 {
        assert_eq!(
            read(&out, &format!("tx_pattern_group{g}.csv"))
                .lines()
                .count(),
            182
        );
    }
    assert_eq!(read(&out, "rx_pattern_user3.csv").lines().count(), 182);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("out");
    let o = o.to_str().unwrap();
    // Missing scenario source.
    assert_eq!(mmcast(&["run", "--out", o]).status.code(), Some(1));
    // Unknown preset and unknown subcommand.
    assert_eq!(
        mmcast(&["run", "--preset", "fig9", "--out", o])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(mmcast(&["explode"]).status.code(), Some(1));
    // Unreadable file.
    assert_eq!(
        mmcast(&["run", "--config", "/nonexistent/cfg.json", "--out", o])
            .status
            .code(),
        Some(1)
    );
    // Required field missing: the message names it.
    let cfg = write_config(
        dir.path(),
        r#"{"n_tx": 4, "n_rx": 1, "n_rf": 2, "G": 2, "gamma_db": 3}"#,
    );
    let res = mmcast(&["run", "--config", &cfg, "--out", o]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("num_users"));
    // RF chains outside G..=N_tx.
    let cfg = write_config(
        dir.path(),
        r#"{"n_tx": 4, "n_rx": 1, "n_rf": 5, "K": 4, "G": 2}"#,
    );
    assert_eq!(
        mmcast(&["run", "--config", &cfg, "--out", o]).status.code(),
        Some(1)
    );
    // Malformed JSON.
    let cfg = write_config(dir.path(), "{ not json");
    assert_eq!(
        mmcast(&["run", "--config", &cfg, "--out", o]).status.code(),
        Some(1)
    );
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let res = mmcast(&[
        "beampattern",
        "--preset",
        "fig5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let res = mmcast(&["--help"]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("beampattern"));
}
