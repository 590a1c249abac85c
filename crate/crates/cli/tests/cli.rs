use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "cells = 3\ncell_samples = 3\nkernel_size = 5\ngrid = 3\nslices = 3\ncrop = 16\n\
encoder_channels = 2\nencoder_blocks = 1\nlr = 0.01\nepochs = 4\ncheckpoint_every = 2\n";

fn lumos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumos"))
        .args(args)
        .env_remove("LUMOS_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lumos(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two 3x3 scenes of 24x24 pixels and the small config.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--jobs", "1", "--seed", "5", "synth", "--out", p(&dir.path().join("data")), "--count", "2", "--grid", "3", "--size", "24"]);
    fs::write(dir.path().join("cfg.txt"), CONFIG).unwrap();
    dir
}

#[test]
fn render_gt_writes_every_slice_and_is_repeatable() {
    let dir = workspace();
    let d = dir.path();
    let scene = d.join("data/scene_000");
    for out in ["gt1", "gt2"] {
        ok(&["render-gt", "--scene", p(&scene), "--config", p(&d.join("cfg.txt")), "--out", p(&d.join(out))]);
    }
    for j in 0..3 {
        let name = format!("stack_{j}.png");
        assert_eq!(fs::read(d.join("gt1").join(&name)).unwrap(), fs::read(d.join("gt2").join(&name)).unwrap());
    }
    assert!(!d.join("gt1/stack_3.png").exists());
    let meta = fs::read_to_string(d.join("gt1/stack.txt")).unwrap();
    assert_eq!(meta.lines().filter(|l| l.starts_with("slice ")).count(), 3);
    let manifest = fs::read_to_string(d.join("gt1/manifest.txt")).unwrap();
    assert!(manifest.contains("command = render-gt") && manifest.contains("sha256") && manifest.contains("[config]"));
}

#[test]
fn missing_view_is_a_data_error() {
    let dir = workspace();
    let scene = dir.path().join("data/scene_001");
    fs::remove_file(scene.join("view_1_2.png")).unwrap();
    let out = lumos(&["render-gt", "--scene", p(&scene), "--out", p(&dir.path().join("gt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing view file for angular position (1, 2)"));
}

#[test]
fn train_resume_matches_uninterrupted_run() {
    let dir = workspace();
    let d = dir.path();
    let (data, cfg) = (d.join("data"), d.join("cfg.txt"));
    ok(&["--jobs", "1", "train", "--dataset", p(&data), "--config", p(&cfg), "--out", p(&d.join("full"))]);
    let loss = fs::read_to_string(d.join("full/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 5);
    let mid = d.join("full/checkpoint_000002.bin");
    ok(&["--jobs", "1", "train", "--dataset", p(&data), "--resume", p(&mid), "--out", p(&d.join("resumed"))]);
    assert_eq!(fs::read(d.join("full/checkpoint.bin")).unwrap(), fs::read(d.join("resumed/checkpoint.bin")).unwrap());
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = workspace();
    let d = dir.path();
    let (data, cfg) = (d.join("data"), d.join("cfg.txt"));
    for run in ["a", "b"] {
        let out = d.join(run);
        ok(&["--jobs", "1", "--seed", "9", "train", "--dataset", p(&data), "--config", p(&cfg), "--out", p(&out)]);
        let ckpt = out.join("checkpoint.bin");
        ok(&["--jobs", "1", "eval", "--ckpt", p(&ckpt), "--dataset", p(&data), "--out", p(&out.join("eval"))]);
    }
    for file in ["checkpoint.bin", "loss.csv", "eval/report.txt", "eval/report.csv"] {
        assert_eq!(fs::read(d.join("a").join(file)).unwrap(), fs::read(d.join("b").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--seed", "11", "synth", "--out", p(&d.join("flag")), "--count", "1", "--grid", "3", "--size", "8"]);
    let out = Command::new(env!("CARGO_BIN_EXE_lumos"))
        .args(["synth", "--out", p(&d.join("env")), "--count", "1", "--grid", "3", "--size", "8"])
        .env("LUMOS_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    let view = "scene_000/view_2_1.png";
    assert_eq!(fs::read(d.join("flag").join(view)).unwrap(), fs::read(d.join("env").join(view)).unwrap());
}

#[test]
fn unknown_config_key_is_named() {
    let dir = workspace();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "betta = 2\n").unwrap();
    let out = lumos(&["train", "--dataset", p(&dir.path().join("data")), "--config", p(&bad), "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("betta"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(lumos(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lumos(&["eval", "--ckpt", "x"]).status.code(), Some(1));
    assert_eq!(lumos(&["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_reports_a_small_error() {
    let stdout = ok(&["gradcheck", "--size", "8"]);
    let value: f64 = stdout
        .split("max relative error = ")
        .nth(1)
        .and_then(|r| r.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .expect("error value printed");
    assert!(value <= 1e-4, "{stdout}");
}

#[test]
fn eval_and_export_on_a_fresh_checkpoint() {
    let dir = workspace();
    let d = dir.path();
    let cfg = d.join("cfg0.txt");
    fs::write(&cfg, format!("{CONFIG}epochs = 0\naperture_mode = binary-relaxed\n")).unwrap();
    ok(&["train", "--dataset", p(&d.join("data")), "--config", p(&cfg), "--out", p(&d.join("run"))]);
    let ckpt = d.join("run/checkpoint.bin");
    let summary = ok(&["eval", "--ckpt", p(&ckpt), "--dataset", p(&d.join("data")), "--out", p(&d.join("eval"))]);
    assert_eq!(summary.lines().count(), 3);
    let report = fs::read_to_string(d.join("eval/report.txt")).unwrap();
    // 2 scenes x 3 methods x (3 slices + 1 mean) + 3 overall lines
    assert_eq!(report.lines().count(), 2 * 3 * 4 + 3);
    assert!(report.starts_with("scene=scene_000 method=ctdm slice=0 psi="));
    let csv = fs::read_to_string(d.join("eval/report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("scene,method,slice,psi,psnr,ssim"));

    ok(&["export-apertures", "--ckpt", p(&ckpt), "--out", p(&d.join("ap"))]);
    for i in 0..4 {
        assert!(d.join(format!("ap/aperture_{i}.png")).exists());
        let text = fs::read_to_string(d.join(format!("ap/aperture_{i}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.split([',', '\n']).filter(|v| !v.is_empty()).all(|v| v == "0" || v == "1"));
    }
    assert!(!d.join("ap/aperture_4.csv").exists());
}

#[test]
fn ablation_report_has_one_row_per_variant() {
    let dir = workspace();
    let d = dir.path();
    let cfg = d.join("cfg1.txt");
    fs::write(&cfg, format!("{CONFIG}epochs = 1\n")).unwrap();
    fs::write(d.join("grid.txt"), "baseline learn_f=false learn_apertures=false\nbeta0 beta=0\n").unwrap();
    let csv = ok(&[
        "ablate", "--grid", p(&d.join("grid.txt")), "--dataset", p(&d.join("data")), "--config", p(&cfg), "--out",
        p(&d.join("abl")),
    ]);
    let names: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["base", "baseline", "beta0"]);
    assert!(d.join("abl/ablation.csv").exists() && d.join("abl/manifest.txt").exists());
}
