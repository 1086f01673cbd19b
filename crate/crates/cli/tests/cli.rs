use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ranemu");

const SCENARIO: &str = r#"
schema_version = 1
duration_ms = 1000
rng_seed = 11

[carrier]
frequency_hz = 3.5e9
dl_bandwidth_hz = 20e6
ul_bandwidth_hz = 20e6
numerology = 1

[[ue]]
id = 1
position = [120.0, 40.0, 1.5]
traffic = { kind = "simulated", dl_bps = 8e6, ul_bps = 1e6, packet_size_bits = 12000 }
mobility = { kind = "random_walk", speed_mps = 1.5 }

[[ue]]
id = 2
position = [-300.0, 10.0, 1.5]
traffic = { kind = "simulated", dl_bps = 4e6, ul_bps = 2e6, packet_size_bits = 8000 }
"#;

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn ranemu(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn missing_config_is_usage_error() {
    let out = ranemu(&[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--config"), "{err}");
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn unreadable_or_invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(ranemu(&["--config", missing.to_str().unwrap()]).status.code(), Some(1));

    let bad = write_scenario(dir.path(), &SCENARIO.replace("schema_version = 1", "schema_version = 9"));
    let out = ranemu(&["--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version"));
}

#[test]
fn bad_mode_flag_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), SCENARIO);
    let out = ranemu(&["--config", cfg.to_str().unwrap(), "--mode", "warp"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_metrics_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), SCENARIO);
    let target = dir.path().join("no/such/dir/m.csv");
    let out = ranemu(&["--config", cfg.to_str().unwrap(), "--metrics-out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fast_run_writes_one_row_per_tick_ue_direction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), SCENARIO);
    let metrics = dir.path().join("m.csv");
    let out = ranemu(&[
        "--config",
        cfg.to_str().unwrap(),
        "--mode",
        "fast",
        "--duration-ms",
        "250",
        "--metrics-out",
        metrics.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ticks 250"), "{stdout}");
    assert!(stdout.contains("thr_mbps"), "{stdout}");

    let text = std::fs::read_to_string(&metrics).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(ranemu_core::metrics::VERSION_LINE));
    assert_eq!(lines.next(), Some(ranemu_core::metrics::HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 250 * 2 * 2);
    assert!(rows.iter().all(|r| r.split(',').count() == 14));
}

#[test]
fn seeded_fast_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), SCENARIO);
    let run = |name: &str, seed: &str| {
        let m = dir.path().join(name);
        let out = ranemu(&[
            "--config",
            cfg.to_str().unwrap(),
            "--mode",
            "fast",
            "--seed",
            seed,
            "--metrics-out",
            m.to_str().unwrap(),
            "--log-level",
            "off",
        ]);
        assert!(out.status.success());
        std::fs::read(m).unwrap()
    };
    let a = run("a.csv", "42");
    let b = run("b.csv", "42");
    let c = run("c.csv", "43");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
