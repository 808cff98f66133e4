mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uavcrowd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavcrowd")).args(args).env_remove("UAVCROWD_SEED").output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn generate_radius_two_has_nineteen_tiles() {
    let doc = stdout_json(&uavcrowd(&["generate", "--radius", "2", "--seed", "4"]));
    assert_eq!(doc["tiles"].as_array().unwrap().len(), 19);
    let again = stdout_json(&uavcrowd(&["generate", "--radius", "2", "--seed", "4"]));
    assert_eq!(doc, again);
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let by_flag = uavcrowd(&["generate", "--radius", "3", "--seed", "9"]);
    let by_env = Command::new(env!("CARGO_BIN_EXE_uavcrowd"))
        .args(["generate", "--radius", "3", "--seed", "1"])
        .env("UAVCROWD_SEED", "9")
        .output()
        .unwrap();
    assert!(by_env.status.success());
    assert_eq!(by_flag.stdout, by_env.stdout);
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["generate", "--bogus"][..], &["fly"][..], &[][..], &["record"][..]] {
        let out = uavcrowd(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_one_with_code() {
    let out = uavcrowd(&["bench", "--agents", "0", "--ticks", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error [invalid_parameter]"));
    let dir = tempfile::tempdir().unwrap();
    let out = uavcrowd(&["record", "--duration", "11", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid_script"));
}

#[test]
fn short_record_is_byte_identical_across_runs() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = uavcrowd(&["record", "--seed", "7", "--agents", "20", "--duration", "1", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let clip = dirs[0].path().join("clip_s7");
    assert_eq!(fs::read_dir(&clip).unwrap().count(), 30 * 4);
    assert_eq!(common::dir_digest(dirs[0].path()), common::dir_digest(dirs[1].path()));
    let inv: Value = serde_json::from_str(&fs::read_to_string(dirs[0].path().join("clips.json")).unwrap()).unwrap();
    assert_eq!(inv["clips"][0]["frame_count"], 30);
}

fn write_script(dir: &Path, name: &str, scenario: &str, activity: &str) -> String {
    let path = dir.join(format!("{name}.json"));
    let script = serde_json::json!({"name": name, "seed": name.len(), "duration_s": 0.5,
        "groups": [{"size": 4, "scenario": scenario, "activities": [activity]}]});
    fs::write(&path, script.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn record_then_export_lays_out_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let mut clips = Vec::new();
    for (name, scenario, activity) in [("fight", "violent", "punch"), ("chat", "non_violent", "talk")] {
        let script = write_script(tmp.path(), name, scenario, activity);
        let out = tmp.path().join(format!("rec_{name}"));
        let res = uavcrowd(&["record", "--script", &script, "--dry-run", "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert!(!out.join(name).exists(), "dry run writes no frames");
        let inv: Value = serde_json::from_str(&fs::read_to_string(out.join("clips.json")).unwrap()).unwrap();
        clips.extend(inv["clips"].as_array().unwrap().iter().cloned());
    }
    let mut inv: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("rec_fight/clips.json")).unwrap()).unwrap();
    inv["clips"] = Value::Array(clips);
    let inv_path = tmp.path().join("inventory.json");
    fs::write(&inv_path, inv.to_string()).unwrap();

    let ds = tmp.path().join("dataset");
    let summary = stdout_json(&uavcrowd(&[
        "export", "--inventory", inv_path.to_str().unwrap(), "--split-seed", "3", "--out", ds.to_str().unwrap(),
    ]));
    assert_eq!(summary["clips"], 2);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(ds.join("manifest.json")).unwrap()).unwrap();
    // One clip per class: both land in test.
    for c in manifest["clips"].as_array().unwrap() {
        assert_eq!(c["split"], "test");
        assert_eq!(c["frames"], 15);
        let dir = ds.join("test").join(c["label"].as_str().unwrap()).join(c["id"].as_str().unwrap());
        for f in ["frame_00014.ppm", "seg_00014.ppm", "depth_00014.pgm", "ann_00014.json"] {
            assert!(dir.join(f).exists(), "{}", dir.join(f).display());
        }
    }

    let only = tmp.path().join("manifest_only");
    stdout_json(&uavcrowd(&[
        "export", "--inventory", inv_path.to_str().unwrap(), "--split-seed", "3", "--manifest-only", "--out",
        only.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(only.join("manifest.json")).unwrap(), fs::read(ds.join("manifest.json")).unwrap());
    assert!(!only.join("test").exists());
}

#[test]
fn bench_reports_requested_rows() {
    let out = uavcrowd(&["bench", "--agents", "0", "--ticks", "300", "--format", "json"]);
    let report = stdout_json(&out);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["agent_count"], 0);
    assert_eq!(rows[0]["ticks_measured"], 300);
    assert!(rows[0]["mean_fps"].as_f64().unwrap().is_finite());
}
