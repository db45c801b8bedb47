//! End-to-end checks of the harness: known closed-form outputs, rerun
//! determinism, flag/env precedence, and exit codes.

use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use zrp_cli::{csv_body, run, Command, ExperimentConfig};

const BIN: &str = env!("CARGO_BIN_EXE_zrp");

fn triangle_json() -> &'static str {
    r#"{
      "walk": {"kappa": 3, "rates": [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]},
      "n_list": [30]
    }"#
}

fn value_of(art: &zrp_cli::Artifacts, quantity: &str) -> f64 {
    art.rows
        .iter()
        .find(|r| r.quantity == quantity)
        .unwrap_or_else(|| panic!("missing row {quantity}"))
        .value
}

#[test]
fn triangle_capacities_are_one_half() {
    let cfg = ExperimentConfig::from_json(triangle_json()).unwrap();
    let art = run(Command::Walk, &cfg).unwrap().remove(0);
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let cap = value_of(&art, &format!("capacity_{a}_{b}"));
        assert!((cap - 0.5).abs() < 1e-12, "capacity_{a}_{b} = {cap}");
        let rate = value_of(&art, &format!("limit_rate_{a}_{b}"));
        assert!((rate - 9.0).abs() < 1e-10, "limit_rate_{a}_{b} = {rate}");
    }
}

#[test]
fn two_site_normalizer_matches_tabulated_value() {
    let cfg = ExperimentConfig::from_json(
        r#"{"walk": {"kappa": 2, "rates": [[0.0, 1.0], [1.0, 0.0]]}, "n_list": [1000]}"#,
    )
    .unwrap();
    let art = run(Command::Measure, &cfg).unwrap().remove(0);
    let z = value_of(&art, "z_scaled");
    assert!((z - 2.4565).abs() < 5e-4, "z_scaled = {z}");
}

fn run_bin(args: &[&str], envs: &[(&str, &str)]) -> std::process::Output {
    Proc::new(BIN)
        .args(args)
        .envs(envs.iter().copied())
        .output()
        .expect("spawn zrp binary")
}

fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, csv_body(&fs::read_to_string(&path).unwrap())));
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.json");
    fs::write(
        &cfg_path,
        r#"{
          "walk": {"kappa": 3, "rates": [[0.0, 1.0, 0.5], [1.0, 0.0, 2.0], [0.5, 2.0, 0.0]]},
          "n_list": [40],
          "replicas": 3,
          "t_max": 2.0
        }"#,
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();
    for sub in ["walk", "measure", "simulate"] {
        let out_a = dir.path().join(format!("{sub}_a"));
        let out_b = dir.path().join(format!("{sub}_b"));
        for out in [&out_a, &out_b] {
            let st = run_bin(&[sub, "--config", cfg, "--out", out.to_str().unwrap()], &[]);
            assert!(st.status.success(), "{sub}: {:?}", st);
        }
        let a = csv_bodies(&out_a);
        let b = csv_bodies(&out_b);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{sub} bodies differ between reruns");
    }
}

#[test]
fn flags_beat_environment_for_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.json");
    fs::write(
        &cfg_path,
        r#"{"walk": {"kappa": 2, "rates": [[0.0, 1.0], [1.0, 0.0]]}, "n_list": [30]}"#,
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let out_env = dir.path().join("env");
    let st = run_bin(
        &["measure", "--config", cfg, "--out", out_env.to_str().unwrap()],
        &[("ZRP_SEED", "7")],
    );
    assert!(st.status.success());
    let text = fs::read_to_string(out_env.join("measure.csv")).unwrap();
    assert!(text.contains("# seed: 7"), "env seed ignored:\n{text}");

    let out_flag = dir.path().join("flag");
    let st = run_bin(
        &[
            "measure",
            "--config",
            cfg,
            "--out",
            out_flag.to_str().unwrap(),
            "--seed",
            "9",
        ],
        &[("ZRP_SEED", "7")],
    );
    assert!(st.status.success());
    let text = fs::read_to_string(out_flag.join("measure.csv")).unwrap();
    assert!(text.contains("# seed: 9"), "flag lost to env:\n{text}");
}

#[test]
fn bad_inputs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let st = run_bin(&["measure", "--config", missing.to_str().unwrap()], &[]);
    assert_eq!(st.status.code(), Some(2));

    let cfg_path = dir.path().join("exp.json");
    fs::write(
        &cfg_path,
        r#"{"walk": {"kappa": 2, "rates": [[0.0, 1.0], [1.0, 0.0]]}, "n_list": [30], "bogus": 1}"#,
    )
    .unwrap();
    let st = run_bin(&["measure", "--config", cfg_path.to_str().unwrap()], &[]);
    assert_eq!(st.status.code(), Some(2));
    let err = String::from_utf8_lossy(&st.stderr).into_owned();
    assert!(err.contains("bogus"), "error does not name the field: {err}");
}

#[test]
fn exhausted_state_budget_exits_with_resource_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.json");
    fs::write(
        &cfg_path,
        r#"{
          "walk": {"kappa": 3, "rates": [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]},
          "n_list": [60],
          "cap_states": 100
        }"#,
    )
    .unwrap();
    let st = run_bin(
        &[
            "capacity",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(st.status.code(), Some(3), "stderr: {:?}", st);
}
