use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qdtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdtune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = qdtune(args);
    assert!(
        out.status.success(),
        "qdtune {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_kind(args: &[&str]) -> (i32, String) {
    let out = qdtune(args);
    assert!(!out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    (
        out.status.code().unwrap(),
        doc["error"]["kind"].as_str().unwrap().to_string(),
    )
}

fn render_reference(dir: &Path) -> String {
    let out = dir.join("scan");
    ok(&["render-scan", "--seed", "4", "--out", out.to_str().unwrap()]);
    format!("scan:{}", out.join("scan.qdscan.json").display())
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

#[test]
fn neighborhood_reports_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let source = render_reference(tmp.path());
    let run = |name: &str, workers: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "neighborhood",
            "--source",
            &source,
            "--point",
            "250,230",
            "--point",
            "550,555",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        out
    };
    let first = run("a", "1");
    let second = run("b", "1");
    let wide = run("c", "4");
    same_files(&first, &second);
    same_files(&first, &wide);

    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("neighborhood.json")).unwrap())
            .unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 6);
    assert!(reports.iter().all(|r| r["runs"] == 81));
}

#[test]
fn report_rebuilds_the_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let source = render_reference(tmp.path());
    let exp = tmp.path().join("exp");
    ok(&[
        "neighborhood",
        "--source",
        &source,
        "--policy",
        "fixed100",
        "--point",
        "300,215",
        "--out",
        exp.to_str().unwrap(),
    ]);
    let rep = tmp.path().join("rep");
    ok(&[
        "report",
        "--input",
        exp.join("neighborhood.json").to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
    ]);
    same_files(&rep, &exp);
}

#[test]
fn tune_prints_a_graded_run() {
    let text = ok(&["tune", "--start", "300,215", "--policy", "dynamic"]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["run"]["start"], serde_json::json!([300.0, 215.0]));
    assert!(doc["run"]["iteration_count"].as_u64().unwrap() <= 50);
    assert!(["ideal", "close", "fail"].contains(&doc["grade"].as_str().unwrap()));
}

#[test]
fn dataset_train_evaluate_and_tune_with_a_model() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let data = d.join("data");
    ok(&[
        "gen-dataset",
        "--seed",
        "3",
        "--devices",
        "20",
        "--per-device",
        "5",
        "--out",
        data.to_str().unwrap(),
    ]);
    let dataset = data.join("dataset.json");
    let model_dir = d.join("model");
    ok(&[
        "train",
        "--dataset",
        dataset.to_str().unwrap(),
        "--steps",
        "40",
        "--seed",
        "1",
        "--out",
        model_dir.to_str().unwrap(),
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(model_dir.join("training.json")).unwrap())
            .unwrap();
    assert_eq!(summary["train_samples"], 80);
    assert_eq!(summary["test_samples"], 20);

    let model = model_dir.join("model.json");
    let eval: serde_json::Value = serde_json::from_str(&ok(&[
        "evaluate",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
    ]))
    .unwrap();
    assert_eq!(eval["samples"], 100);

    let classifier = format!("model:{}", model.display());
    let run: serde_json::Value = serde_json::from_str(&ok(&[
        "tune",
        "--start",
        "250,230",
        "--classifier",
        &classifier,
        "--seed",
        "2",
    ]))
    .unwrap();
    assert_ne!(run["run"]["outcome"]["kind"], "aborted");
}

#[test]
fn landscape_has_the_expected_size() {
    let text = ok(&["landscape", "--center", "325,350", "--span", "400"]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let values = doc["values"].as_array().unwrap();
    assert_eq!(values.len(), 171);
    assert!(values.iter().all(|r| r.as_array().unwrap().len() == 171));
    assert_eq!(doc["argmin_label"], "DoubleDot");
}

#[test]
fn heatmap_uses_the_configured_rectangle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"heatmap": {"grid_step": 20, "rect": [[150, 450], [150, 450]]}, "policies": ["fixed75"]}"#,
    )
    .unwrap();
    let out = tmp.path().join("hm");
    ok(&[
        "heatmap",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let maps: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("heatmap.json")).unwrap()).unwrap();
    let map = &maps[0];
    // 75 mV step plus a 30 mV half-window below, 30 mV above.
    assert_eq!(map["v1_starts"][0], 255.0);
    let csv = fs::read_to_string(out.join("heatmap_fixed75.csv")).unwrap();
    assert!(csv.starts_with("v1,v2,success,iterations\n"));
    for row in map["success"].as_array().unwrap() {
        for v in row.as_array().unwrap() {
            assert!([0.0, 0.5, 1.0].contains(&v.as_f64().unwrap()));
        }
    }
}

#[test]
fn failures_are_reported_as_json() {
    assert_eq!(
        error_kind(&["tune", "--start", "700,230"]),
        (1, "domain".into())
    );
    assert_eq!(
        error_kind(&["tune", "--start", "300,300", "--policy", "fastest"]),
        (1, "config".into())
    );
    assert_eq!(
        error_kind(&["tune", "--start", "300,300", "--source", "file.json"]),
        (1, "cli".into())
    );
    assert_eq!(
        error_kind(&["evaluate", "--model", "/nonexistent", "--dataset", "x"]),
        (1, "io".into())
    );
    assert_eq!(error_kind(&["frobnicate"]).0, 2);
    assert_eq!(error_kind(&["tune"]), (2, "usage".into()));
}

#[test]
fn seeded_device_sampling_is_stable() {
    let a = ok(&["sample-device", "--seed", "17"]);
    assert_eq!(a, ok(&["sample-device", "--seed", "17"]));
    assert_ne!(a, ok(&["sample-device", "--seed", "18"]));
    assert!(ok(&["sample-device"]).contains("\"seed\": 0"));
}
