use splatphys::cli::{parse_config, PipelineConfig};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splatphys")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a bundled scene and returns its config, shortened for tests.
fn scene(dir: &Path, kind: &str) -> (PathBuf, PipelineConfig) {
    let out = bin(&["scene", "--kind", kind, "--out", path_str(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.join("config.toml");
    let mut cfg = parse_config(&path).unwrap();
    cfg.sim.grid = 32;
    cfg.sim.frames = 4;
    cfg.fill.candidates = 4000;
    cfg.fill.fill_density = 1.0;
    std::fs::write(&path, cfg.to_toml()).unwrap();
    (path, cfg)
}

#[test]
fn staged_commands_produce_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (config, cfg) = scene(dir.path(), "shell-pair");
    let filled = cfg.output.join("filled.ply");
    let out = bin(&[
        "fill",
        "--in",
        path_str(&cfg.input),
        "--out",
        path_str(&filled),
        "--candidates",
        "4000",
        "--fill-density",
        "1",
        "--grid",
        "32",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(filled.exists());

    let out = bin(&["simulate", "--config", path_str(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(cfg.output.join("frames")).unwrap().count(), 4);
    assert!(cfg.output.join("run.json").exists());
    assert!(cfg.output.join("snapshots").join("snapshot_0003.ply").exists());

    let report = dir.path().join("report.jsonl");
    let out = bin(&["optimize", "--config", path_str(&config), "--iterations", "3", "--report", path_str(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3 * 2);
    for r in &records {
        assert!(r["young_after"].as_f64().unwrap() > 0.0);
    }
    let materials = std::fs::read_to_string(cfg.output.join("materials.toml")).unwrap();
    assert!(materials.contains("young"));
}

#[test]
fn pipeline_writes_timing_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let (config, cfg) = scene(dir.path(), "hollow-cube");
    let out = bin(&["pipeline", "--config", path_str(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let timing = std::fs::read_to_string(cfg.output.join("timing.txt")).unwrap();
    for stage in ["fill", "forward", "optimize", "final", "total"] {
        assert!(timing.contains(stage), "{timing}");
    }
    let audit = std::fs::read_to_string(cfg.output.join("audit.jsonl")).unwrap();
    assert_eq!(audit.lines().count(), 2);
    assert_eq!(std::fs::read_dir(cfg.output.join("frames")).unwrap().count(), 4);
}

#[test]
fn missing_material_fails_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let (config, mut cfg) = scene(dir.path(), "shell-pair");
    cfg.materials.retain(|m| m.label == 0);
    std::fs::write(&config, cfg.to_toml()).unwrap();
    let out = bin(&["pipeline", "--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains('1'), "{stderr}");
    assert!(!cfg.output.join("frames").exists());
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = scene(dir.path(), "hollow-cube");
    let text = std::fs::read_to_string(&config).unwrap();

    std::fs::write(&config, format!("{text}\nbogus_key = 1\n")).unwrap();
    let out = bin(&["pipeline", "--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));

    std::fs::write(&config, text.replace("poisson = 0.3", "poisson = 0.7")).unwrap();
    let out = bin(&["pipeline", "--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("poisson"));

    let out = bin(&["simulate", "--config", path_str(&dir.path().join("absent.toml"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        bin(&["fill", "--in", path_str(&dir.path().join("nope.ply")), "--out", path_str(&dir.path().join("o.ply"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.ply"));
}
