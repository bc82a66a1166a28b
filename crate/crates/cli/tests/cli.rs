use std::path::Path;
use std::process::Command;

use serde_json::Value;

use orgb_cli::run_cli;
use orgb_core::Epsilon;

fn orgb(args: &[&str]) -> i32 {
    run_cli(std::iter::once("orgb").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn simulate_line(dir: &Path) {
    assert_eq!(orgb(&["simulate", "--preset", "line", "--out-dir", path(dir)]), 0);
}

#[test]
fn estimate_writes_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_line(tmp.path());
    let eps = tmp.path().join("eps.json");
    let code = orgb(&[
        "estimate",
        "--image",
        path(&tmp.path().join("image.png")),
        "--rect",
        "10,10,40,40",
        "--out",
        path(&eps),
    ]);
    assert_eq!(code, 0);
    let v = read_json(&eps);
    assert_eq!(v["space"], "linear-rgb");
    assert_eq!(v["method"], "ols");
    assert_eq!(v["region"], serde_json::json!({"x": 10, "y": 10, "w": 40, "h": 40}));
    assert_eq!(v["fits"].as_array().unwrap().len(), 3);
    Epsilon::from_json(&std::fs::read_to_string(&eps).unwrap()).unwrap();
}

#[test]
fn corrected_png_re_estimates_to_zero() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_line(tmp.path());
    let (a, b) = (tmp.path().join("image.png"), tmp.path().join("b.png"));
    let (eps, after) = (tmp.path().join("eps.json"), tmp.path().join("after.json"));
    let rect = "10,10,40,40";
    assert_eq!(orgb(&["estimate", "--image", path(&a), "--rect", rect, "--out", path(&eps)]), 0);
    assert_eq!(orgb(&["correct", "--image", path(&a), "--eps", path(&eps), "--out", path(&b)]), 0);
    assert_eq!(orgb(&["estimate", "--image", path(&b), "--rect", rect, "--out", path(&after)]), 0);
    let e = Epsilon::from_json(&std::fs::read_to_string(&after).unwrap()).unwrap();
    assert!(e.eps.iter().all(|v| v.abs() < 1e-6), "{:?}", e.eps);
}

#[test]
fn correct_accepts_inline_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    simulate_line(dir);
    let truth = read_json(&dir.join("truth.json"));
    let eps: Vec<String> = (0..3)
        .map(|k| truth["expected_epsilon"][k].as_f64().unwrap().to_string())
        .collect();
    let (out, after) = (dir.join("c.f64"), dir.join("after.json"));
    let code = orgb(&[
        "correct",
        "--image",
        path(&dir.join("image.f64")),
        "--epsilon",
        &eps.join(","),
        "--out",
        path(&out),
    ]);
    assert_eq!(code, 0);
    assert_eq!(orgb(&["estimate", "--image", path(&out), "--rect", "0,0,100,100", "--out", path(&after)]), 0);
    let e = Epsilon::from_json(&std::fs::read_to_string(&after).unwrap()).unwrap();
    assert!(e.eps.iter().all(|v| v.abs() < 1e-9), "{:?}", e.eps);
}

#[test]
fn flat_region_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(
        orgb(&["simulate", "--preset", "chart", "--occlusion", "none", "--out-dir", path(dir)]),
        0
    );
    let out = Command::new(env!("CARGO_BIN_EXE_orgb"))
        .args(["estimate", "--image", path(&dir.join("image.png")), "--rect", "2,2,10,10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("flat-region"));
}

#[test]
fn usage_errors_exit_one_with_help() {
    let out = Command::new(env!("CARGO_BIN_EXE_orgb"))
        .args(["estimate", "--image", "a.png", "--bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--bogus") && err.contains("Usage: orgb estimate"), "{err}");
    assert_eq!(orgb(&["estimate", "--image", "a.png", "--rect", "1,2,3"]), 1);
    assert_eq!(orgb(&["frobnicate"]), 1);
}

#[test]
fn missing_input_is_a_data_error() {
    assert_eq!(orgb(&["estimate", "--image", "/nonexistent/a.png", "--rect", "0,0,4,4"]), 2);
}

#[test]
fn simulate_writes_declared_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(orgb(&["simulate", "--preset", "road", "--out-dir", path(dir)]), 0);
    for f in ["image.png", "image.f64", "phi.f64", "delta.f64", "labels.png", "scene.json", "truth.json", "regions.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let truth = read_json(&dir.join("truth.json"));
    assert_eq!(truth["patches"].as_array().unwrap().len(), 3);
    assert_eq!(truth["patches"][1]["name"], "road");

    // the written scene document reproduces the render
    let again = tmp.path().join("again");
    assert_eq!(
        orgb(&["simulate", "--scene", path(&dir.join("scene.json")), "--out-dir", path(&again)]),
        0
    );
    assert_eq!(
        std::fs::read(dir.join("image.f64")).unwrap(),
        std::fs::read(again.join("image.f64")).unwrap()
    );
}

#[test]
fn diagnose_reports_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(orgb(&["simulate", "--preset", "chart", "--ambient", "0", "--out-dir", path(dir)]), 0);
    let report = dir.join("report.json");
    let code = orgb(&[
        "diagnose",
        "--image",
        path(&dir.join("image.f64")),
        "--regions",
        path(&dir.join("regions.json")),
        "--out",
        path(&report),
    ]);
    assert_eq!(code, 0);
    let v = read_json(&report);
    assert_eq!(v["lines"].as_array().unwrap().len(), 24);
    let point = &v["convergence"]["point"];
    assert!((0..3).all(|k| point[k].as_f64().unwrap().abs() < 1e-9));
}

#[test]
fn convert_writes_channels() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_line(tmp.path());
    let image = tmp.path().join("image.png");
    let out_dir = tmp.path().join("luv");
    assert_eq!(
        orgb(&["convert", "--image", path(&image), "--space", "luv", "--histeq", "--out-dir", path(&out_dir)]),
        0
    );
    for c in ["L", "u", "v"] {
        assert!(out_dir.join(format!("luv_{c}.png")).is_file());
    }
    let s = tmp.path().join("s.f64");
    assert_eq!(
        orgb(&["convert", "--image", path(&image), "--space", "hsv", "--channel", "s", "--out", path(&s)]),
        0
    );
    assert_eq!(
        orgb(&["convert", "--image", path(&image), "--space", "hsv", "--channel", "q", "--out", path(&s)]),
        2
    );
    // --out needs --channel
    assert_eq!(orgb(&["convert", "--image", path(&image), "--space", "hsv", "--out", path(&s)]), 1);
}

#[test]
fn demo_pipeline_improves_segmentation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(orgb(&["simulate", "--preset", "road", "--out-dir", path(dir)]), 0);
    let image = dir.join("image.f64");
    let eps = dir.join("eps.json");
    assert_eq!(orgb(&["estimate", "--image", path(&image), "--rect", "24,0,16,64", "--out", path(&eps)]), 0);

    let score = |eps: Option<&Path>, tag: &str| {
        let labels = dir.join(format!("{tag}.png"));
        let metrics = dir.join(format!("{tag}.json"));
        let mut args = vec!["demo", "segment", "--image", path(&image), "--out", path(&labels)];
        if let Some(e) = eps {
            args.extend(["--eps", path(e)]);
        }
        assert_eq!(orgb(&args), 0);
        let code = orgb(&[
            "demo",
            "metrics",
            "--pred",
            path(&labels),
            "--truth",
            path(&dir.join("labels.png")),
            "--truth-label",
            "1",
            "--out",
            path(&metrics),
        ]);
        assert_eq!(code, 0);
        read_json(&metrics)["g_quality"].as_f64().unwrap()
    };
    let raw = score(None, "raw");
    let corrected = score(Some(&eps), "corrected");
    assert!(corrected >= 0.95 && corrected > raw, "{raw} -> {corrected}");

    let edges = dir.join("edges.png");
    assert_eq!(orgb(&["demo", "edges", "--image", path(&image), "--out", path(&edges)]), 0);
    assert!(edges.is_file());
}
