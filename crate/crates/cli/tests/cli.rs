use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use timeconv::data::{synthetic_clip, Emotion};

fn timeconv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timeconv"))
        .args(args)
        .current_dir(cwd)
        .env("TIMECONV_DETERMINISTIC", "1")
        .output()
        .expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn synth_train_eval_bench_stream() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = ok_json(&timeconv(&["synth", "--per-class", "50", "--seed", "42", "--out", "s.tcvx"], d));
    assert_eq!(synth["samples"], 350);

    let trained = ok_json(&timeconv(
        &["train", "--arch", "timeconv_resnet20", "--data", "s.tcvx", "--epochs", "30", "--out", "m.tcwt"],
        d,
    ));
    assert!(d.join("m.tcwt").is_file());
    let metrics = fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 31);
    assert!(metrics.starts_with("epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy\n"));
    assert_eq!(trained["split_sizes"], serde_json::json!([245, 35, 70]));
    assert!(trained["final"]["train_accuracy"].as_f64().unwrap() > 0.95, "{trained}");

    let eval = ok_json(&timeconv(
        &["eval", "--model", "m.tcwt", "--data", "s.tcvx", "--split", "test", "--report", "eval.json"],
        d,
    ));
    let confusion = eval["evaluation"]["confusion"].as_array().unwrap();
    let total: u64 = confusion.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 70);
    assert_eq!(eval["evaluation"]["accuracy"], trained["test"]["accuracy"]);
    assert!(d.join("eval.json").is_file());

    let bench = ok_json(&timeconv(&["bench", "--model", "m.tcwt", "--runs", "1000"], d));
    let written: Value = serde_json::from_str(&fs::read_to_string(d.join("m.bench.json")).unwrap()).unwrap();
    assert_eq!(written["latencies_ms"].as_array().unwrap().len(), 1000);
    assert_eq!(bench["mean_ms"], written["mean_ms"]);

    let stream = ok_json(&timeconv(&["stream", "--model", "m.tcwt", "--synthetic", "100", "--label", "fear"], d));
    assert_eq!(stream["predictions"], 96);
    assert_eq!(stream["report"]["emitted_at"][0], 4);
}

#[test]
fn fixed_seed_artifacts_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a", "b"] {
        let data = format!("{name}.tcvx");
        let model = format!("{name}.tcwt");
        ok_json(&timeconv(&["synth", "--per-class", "3", "--seed", "9", "--out", &data], d));
        ok_json(&timeconv(
            &["train", "--arch", "xception2d", "--data", &data, "--epochs", "2", "--batch-size", "4", "--seed", "5", "--out", &model],
            d,
        ));
    }
    for ext in ["tcvx", "tcwt", "csv"] {
        let a = fs::read(d.join(format!("a.{ext}"))).unwrap();
        let b = fs::read(d.join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext} differs");
    }
}

#[test]
fn build_dataset_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut clips = Vec::new();
    for (i, e) in [Emotion::Happy, Emotion::Sad].into_iter().enumerate() {
        let sub = d.join(format!("c{i}"));
        fs::create_dir(&sub).unwrap();
        for (k, f) in synthetic_clip(e, 7, 60, 50, 0.0, i as u64).iter().enumerate() {
            f.save_png(&sub.join(format!("{k:02}.png"))).unwrap();
        }
        clips.push(serde_json::json!({ "id": format!("c{i}"), "label": e.as_str(), "frames": { "dir": format!("c{i}") }, "boxes": "whole_frame" }));
    }
    fs::write(d.join("m.json"), serde_json::json!({ "clips": clips }).to_string()).unwrap();
    let r = ok_json(&timeconv(&["build-dataset", "--manifest", "m.json", "--out", "x.tcvx"], d));
    assert_eq!(r["stats"]["total"], 6);
    let first = fs::read(d.join("x.tcvx")).unwrap();
    ok_json(&timeconv(&["build-dataset", "--manifest", "m.json", "--out", "x.tcvx"], d));
    assert_eq!(fs::read(d.join("x.tcvx")).unwrap(), first);
}

#[test]
fn grad_check_reports_every_layer() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok_json(&timeconv(&["grad-check", "--instances", "2", "--seed", "3"], dir.path()));
    let layers = r["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 9);
    assert!(layers.iter().all(|l| l["pass"] == true));
}

#[test]
fn usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let unknown = timeconv(&["synth", "--per-class", "2", "--out", "s.tcvx", "--bogus"], d);
    assert_eq!(unknown.status.code(), Some(2));
    assert_eq!(timeconv(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(timeconv(&["train", "--arch", "lenet", "--data", "x", "--out", "y"], d).status.code(), Some(2));

    let missing = timeconv(&["eval", "--model", "nope.tcwt", "--data", "nope.tcvx"], d);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.tcwt"));

    fs::write(d.join("junk.tcwt"), b"TCWT not really").unwrap();
    let corrupt = timeconv(&["bench", "--model", "junk.tcwt", "--runs", "1"], d);
    assert_eq!(corrupt.status.code(), Some(1));
}
