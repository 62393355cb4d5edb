//! End-to-end tests of the `rsskit` binary: exit codes, JSON schemas,
//! artifact emission, and reproducibility. The shipped scenario files are
//! kept in lockstep with the library presets by `shipped_files_match_presets`
//! (regenerate them with `cargo test -p rsskit-cli -- --ignored`).

use rsskit::config::Config;
use rsskit::policy::{Scene, SceneAgent};
use rsskit::rss_core::AgentState;
use rsskit::sim::{presets, Scenario};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rsskit"));
    cmd.env_remove("RSSKIT_CONFIG");
    cmd
}

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn shipped(name: &str) -> PathBuf {
    crate_dir().join("scenarios").join(name)
}

fn temp_dir(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rsskit-cli-{}-{test}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

/// The file contents the repo ships: presets serialized, plus the default
/// config and a policy-demo scene.
fn shipped_files() -> Vec<(&'static str, String)> {
    let car = |lon: f64, vel: f64, lat: f64| AgentState {
        lon_pos: lon,
        lon_vel: vel,
        lon_acc: 0.0,
        lat_pos: lat,
        lat_vel: 0.0,
        lat_acc: 0.0,
        half_length: 2.0,
        half_width: 0.9,
    };
    // A slower lead in the ego lane and a distant follower in the free one:
    // enough pressure that overtaking scores well, but never so tight that
    // the braking fallback has to engage.
    let demo_scene = Scene {
        ego: car(0.0, 15.0, -1.75),
        ego_lane: 0,
        lane_centers: vec![-1.75, 1.75],
        lane_width: 3.5,
        desired_speed: 20.0,
        agents: vec![
            SceneAgent { id: 1, state: car(55.0, 12.0, -1.75) },
            SceneAgent { id: 2, state: car(-80.0, 18.0, 1.75) },
        ],
        speed_constraints: vec![],
    };
    let demo = json!({ "scene": demo_scene, "duration": 3.0, "sample_period": null });
    vec![
        ("rear_approach.json", presets::rear_approach().to_json_pretty()),
        ("cut_in.json", presets::cut_in().to_json_pretty()),
        ("oncoming.json", presets::oncoming().to_json_pretty()),
        ("swerve_handoff.json", presets::swerve().to_json_pretty()),
        ("swerve_speeding.json", presets::swerve_speeding().to_json_pretty()),
        ("default_config.json", Config::default().to_json_pretty()),
        ("policy_demo.json", serde_json::to_string_pretty(&demo).unwrap()),
    ]
}

#[test]
#[ignore = "rewrites the shipped scenario files from the presets"]
fn regenerate_shipped_files() {
    let dir = crate_dir().join("scenarios");
    std::fs::create_dir_all(&dir).unwrap();
    for (name, contents) in shipped_files() {
        std::fs::write(dir.join(name), contents + "\n").unwrap();
    }
}

#[test]
fn shipped_files_match_presets() {
    for (name, contents) in shipped_files() {
        let on_disk = std::fs::read_to_string(shipped(name))
            .unwrap_or_else(|e| panic!("{name} missing ({e}); run the ignored regen test"));
        let a: Value = serde_json::from_str(&on_disk).unwrap();
        let b: Value = serde_json::from_str(&contents).unwrap();
        assert_eq!(a, b, "{name} diverged from its generator; rerun the regen test");
    }
}

#[test]
fn check_reports_the_worked_example() {
    let out = bin()
        .args([
            "check", "--vr", "20", "--vf", "10", "--rho", "1", "--max-accel", "2", "--min-brake",
            "4", "--max-brake", "8", "--json",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let d = v["same_direction"]["d_min"].as_f64().unwrap();
    assert!((d - 75.25).abs() < 1e-9, "d_min {d}");
    assert!(v["opposite_direction"].is_null());
    assert!(v["lateral"].is_null());
}

#[test]
fn check_covers_all_three_formulas() {
    let out = bin()
        .args(["check", "--vr", "10", "--vf", "5", "--v1", "10", "--v2", "-5", "--lat1", "0.5", "--lat2", "-0.5", "--json"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    for key in ["same_direction", "opposite_direction", "lateral"] {
        assert!(v[key]["d_min"].as_f64().unwrap() > 0.0, "{key} missing");
    }
}

#[test]
fn check_usage_errors_exit_64() {
    // No velocity pair at all.
    let out = bin().arg("check").output().unwrap();
    assert_eq!(code(&out), 64);
    // Negative speed where the same-direction formula requires forward ones.
    let out = bin().args(["check", "--vr=-3", "--vf", "1"]).output().unwrap();
    assert_eq!(code(&out), 64);
    // Incomplete pair.
    let out = bin().args(["check", "--vr", "10"]).output().unwrap();
    assert_eq!(code(&out), 64);
    // Invalid parameter override.
    let out =
        bin().args(["check", "--vr", "10", "--vf", "5", "--min-brake", "0"]).output().unwrap();
    assert_eq!(code(&out), 64);
}

#[test]
fn config_file_and_env_fallback_feed_check() {
    let dir = temp_dir("config");
    std::fs::create_dir_all(&dir).unwrap();
    let mut cfg = Config::default();
    cfg.rss.rho = 1.0;
    cfg.rss.a_max_accel = 2.0;
    cfg.rss.a_min_brake = 4.0;
    cfg.rss.a_max_brake = 8.0;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json_pretty()).unwrap();

    let flag = bin()
        .args(["check", "--vr", "20", "--vf", "10", "--json", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(code(&flag), 0);
    assert!((stdout_json(&flag)["same_direction"]["d_min"].as_f64().unwrap() - 75.25).abs() < 1e-9);

    let mut env_cmd = Command::new(env!("CARGO_BIN_EXE_rsskit"));
    env_cmd.env("RSSKIT_CONFIG", &path);
    let env_out = env_cmd.args(["check", "--vr", "20", "--vf", "10", "--json"]).output().unwrap();
    assert_eq!(code(&env_out), 0);
    assert_eq!(stdout_json(&env_out), stdout_json(&flag));

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_emits_artifacts_and_reports_safe() {
    let dir = temp_dir("run-safe");
    let out = bin()
        .args(["run", "--json", "--scenario"])
        .arg(shipped("rear_approach.json"))
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["safe"], Value::Bool(true));
    assert!(v["digest"].as_str().unwrap().len() == 64);
    let steps = v["steps"].as_u64().unwrap();

    let trace_path = PathBuf::from(v["artifacts"]["trace"].as_str().unwrap());
    let trace_text = std::fs::read_to_string(&trace_path).unwrap();
    assert_eq!(trace_text.lines().count() as u64, steps);
    // Every trace line and both report files parse.
    for line in trace_text.lines() {
        let _: Value = serde_json::from_str(line).unwrap();
    }
    for key in ["events", "responsibility"] {
        let path = PathBuf::from(v["artifacts"][key].as_str().unwrap());
        let _: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_flags_collision_with_exit_two_and_blame() {
    let out = bin()
        .args(["run", "--json", "--scenario"])
        .arg(shipped("swerve_handoff.json"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    assert_eq!(v["safe"], Value::Bool(false));
    assert!(!v["collisions"].as_array().unwrap().is_empty());
    let incidents = v["responsibility"]["incidents"].as_array().unwrap();
    assert_eq!(incidents.len(), 1);
    // The handoff blames the departed van, not the colliding pair.
    assert_eq!(incidents[0]["contributing"], json!([1]));
}

#[test]
fn run_missing_file_is_an_operational_error() {
    let out = bin().args(["run", "--scenario", "/nonexistent/nope.json"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn run_output_is_reproducible() {
    let once = bin()
        .args(["run", "--json", "--scenario"])
        .arg(shipped("oncoming.json"))
        .output()
        .unwrap();
    let twice = bin()
        .args(["run", "--json", "--scenario"])
        .arg(shipped("oncoming.json"))
        .output()
        .unwrap();
    assert_eq!(code(&once), 0);
    assert_eq!(once.stdout, twice.stdout);
}

#[test]
fn fuzz_utopia_small_batch_is_clean_and_stable() {
    let args = [
        "fuzz-utopia",
        "--family",
        "highway",
        "-n",
        "3",
        "--duration",
        "15",
        "--seed",
        "11",
        "--json",
    ];
    let out = bin().args(args).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["clean"], Value::Bool(true));
    assert_eq!(v["families"][0]["family"], json!("highway"));
    assert_eq!(v["families"][0]["collision_free"], json!(3));

    let again = bin().args(args).output().unwrap();
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn validate_sensing_passes_at_reduced_scale() {
    let out = bin()
        .args([
            "validate-sensing",
            "--trials",
            "40000",
            "--infeasibility-trials",
            "5000",
            "--seed",
            "3",
            "--json",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], Value::Bool(true));
    for key in ["empirical", "bound"] {
        assert!(v[key].is_number(), "missing {key}");
    }
    assert_eq!(v["ci"].as_array().unwrap().len(), 2);
    assert!(v["infeasibility"]["report"]["empirical"].as_f64().unwrap() > 0.3);
}

#[test]
fn validate_sensing_rejects_sub_unit_coupling() {
    let out = bin().args(["validate-sensing", "--c", "0.5"]).output().unwrap();
    assert_eq!(code(&out), 64);
}

#[test]
fn policy_demo_reports_action_budget_and_decisions() {
    let dir = temp_dir("policy-demo");
    let out = bin()
        .args(["policy-demo", "--json", "--scenario"])
        .arg(shipped("policy_demo.json"))
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    // 2 lanes x 4 slots x (2 agents x 2 x 3 gaps + 10 fractions) x 3 x 5.
    assert_eq!(v["action_count"], json!(2640));
    let decisions = v["decisions"].as_array().unwrap();
    assert_eq!(decisions.len(), 31);
    assert_eq!(v["fallbacks"], json!(0));
    for d in decisions {
        assert!(d["q"].as_f64().unwrap().is_finite());
        assert!(d["action"]["aggressiveness"].as_f64().unwrap() > 0.0);
    }
    assert!(dir.join("policy_demo_decisions.json").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn scenario_files_round_trip_through_the_library() {
    for name in
        ["rear_approach.json", "cut_in.json", "oncoming.json", "swerve_handoff.json", "swerve_speeding.json"]
    {
        let text = std::fs::read_to_string(shipped(name)).unwrap();
        let sc = Scenario::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        sc.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
