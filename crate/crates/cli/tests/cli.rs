use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use reloc_ldp_cli::config::ExperimentConfig;

const DOBROW_SMALL: &str = r#"{
  "experiment": "dobrow",
  "kernel.family": "mu2", "kernel.gamma": 1, "kernel.delta": 0.5,
  "runlength.family": "deterministic", "runlength.c": 1,
  "dobrow.targets": [2, 4, 6],
  "samples": 20000,
  "seeds.master": 3, "seeds.env": 4
}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reloc-ldp"))
        .args(args)
        .env_remove("RELOC_LDP_WORKERS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn schema_prints_header() {
    let out = bin(&["schema", "scgf"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "xi,horizon,s_of_t,exact_log_mgf,slope_fit,lambda_theory,abs_gap\n"
    );
    assert_eq!(bin(&["schema", "nope"]).status.code(), Some(2));
}

#[test]
fn geometric_law_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DOBROW_SMALL.replace(
        r#""runlength.family": "deterministic", "runlength.c": 1"#,
        r#""runlength.family": "geometric", "runlength.p": 0.5"#,
    );
    let out = bin(&["validate", &write_config(dir.path(), &cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("A2"));
}

#[test]
fn unknown_setting_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DOBROW_SMALL.replace(r#""samples""#, r#""sample_count""#);
    let out = bin(&["validate", &write_config(dir.path(), &cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sample_count"));
}

#[test]
fn malformed_json_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["validate", &write_config(dir.path(), "{ not json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        let out = bin(&["validate", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn output_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DOBROW_SMALL);
    let mut csvs = Vec::new();
    for w in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{w}"));
        let out = bin(&["run", &cfg, "--workers", w, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("dobrow.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "target,tv,samples,chi_square,dof,p_value");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn sidecar_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), DOBROW_SMALL);
    let out_dir = dir.path().join("out");
    let out = bin(&["run", &cfg_path, "--workers", "1", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("dobrow.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["kind"], "dobrow");
    assert_eq!(meta["rows"], 3);
    assert_eq!(meta["seeds"]["master"], 3);
    let echoed = ExperimentConfig::from_json(&meta["config"].to_string()).unwrap();
    assert_eq!(echoed, ExperimentConfig::from_json(DOBROW_SMALL).unwrap());
}
