use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use trd_cli::modelfile::{load_model, save_model};
use trd_cli::pgm::{load_pgm, save_pgm};
use trd_core::influence::{RbfConfig, RbfKind};
use trd_core::model::{init_model, ModelConfig, Task, TrainedMode, TrdModel};
use trd_core::Image;

fn trd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(sub)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn small_model(task: Task, stages: usize) -> TrdModel {
    init_model(&ModelConfig {
        task,
        stages,
        filter_size: 3,
        filters: 4,
        rbf: RbfConfig::new(RbfKind::Gaussian, 15, 310.0).unwrap(),
    })
    .unwrap()
}

fn gradient(h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |y, x| (40 + 5 * x + 3 * y) as f64)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&trd(&["--help"])), 0);
    assert_eq!(code(&trd(&["--version"])), 0);
    assert_eq!(code(&trd(&["denoise", "--bogus"])), 1);
    let out = trd(&["eval", "--data", "x"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--model"), "{}", stderr(&out));
    assert_eq!(code(&trd(&[])), 1);
}

#[test]
fn thread_variable_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_trd"))
        .args(["gradcheck", "--instances", "1"])
        .env("TRD_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.pgm");
    let out = dir.path().join("out.pgm");
    assert_eq!(code(&trd(&["degrade", "--input", s(&missing), "--output", s(&out), "--sigma", "5"])), 2);

    let deep = dir.path().join("deep.pgm");
    std::fs::write(&deep, b"P5\n1 1\n65535\n\0\0").unwrap();
    let out_run = trd(&["degrade", "--input", s(&deep), "--output", s(&out), "--sigma", "5"]);
    assert_eq!(code(&out_run), 2);
    assert!(stderr(&out_run).contains("65535"), "{}", stderr(&out_run));

    let bad_model = dir.path().join("m.json");
    std::fs::write(&bad_model, "{}").unwrap();
    assert_eq!(code(&trd(&["denoise", "--model", s(&bad_model), "--input", s(&deep), "--output", s(&out)])), 2);
}

#[test]
fn degrade_then_restore() {
    let dir = TempDir::new().unwrap();
    let clean = dir.path().join("clean.pgm");
    save_pgm(&gradient(24, 20), &clean).unwrap();

    let noisy = dir.path().join("noisy.pgm");
    assert_eq!(code(&trd(&["degrade", "--input", s(&clean), "--output", s(&noisy), "--sigma", "15", "--seed", "3"])), 0);
    assert_eq!(load_pgm(&noisy).unwrap().dims(), (24, 20));
    assert_ne!(std::fs::read(&noisy).unwrap(), std::fs::read(&clean).unwrap());

    let jpeg = dir.path().join("jpeg.pgm");
    assert_eq!(code(&trd(&["degrade", "--input", s(&clean), "--output", s(&jpeg), "--quality", "10"])), 0);
    assert_eq!(load_pgm(&jpeg).unwrap().dims(), (24, 20));
    assert_eq!(
        code(&trd(&["degrade", "--input", s(&clean), "--output", s(&jpeg), "--quality", "10", "--sigma", "1"])),
        1
    );

    let dn = dir.path().join("dn.json");
    save_model(&small_model(Task::Denoise { sigma: 15.0 }, 2), &dn).unwrap();
    let out = dir.path().join("out.pgm");
    assert_eq!(code(&trd(&["denoise", "--model", s(&dn), "--input", s(&noisy), "--output", s(&out)])), 0);
    assert_eq!(load_pgm(&out).unwrap().dims(), (24, 20));
    assert_eq!(
        code(&trd(&["denoise", "--model", s(&dn), "--input", s(&noisy), "--output", s(&out), "--stages", "1"])),
        0
    );
    assert_eq!(
        code(&trd(&["denoise", "--model", s(&dn), "--input", s(&noisy), "--output", s(&out), "--stages", "3"])),
        1
    );
    assert_eq!(code(&trd(&["deblock", "--model", s(&dn), "--input", s(&jpeg), "--output", s(&out)])), 1);

    let db = dir.path().join("db.json");
    save_model(&small_model(Task::Deblock { quality: 10 }, 1), &db).unwrap();
    assert_eq!(code(&trd(&["deblock", "--model", s(&db), "--input", s(&jpeg), "--output", s(&out)])), 0);
    assert_eq!(load_pgm(&out).unwrap().dims(), (24, 20));
}

#[test]
fn joint_models_refuse_early_stopping() {
    let dir = TempDir::new().unwrap();
    let mut m = small_model(Task::Denoise { sigma: 25.0 }, 2);
    m.trained_mode = TrainedMode::Joint;
    let path = dir.path().join("m.json");
    save_model(&m, &path).unwrap();
    let img = dir.path().join("in.pgm");
    save_pgm(&gradient(8, 8), &img).unwrap();
    let out = dir.path().join("out.pgm");
    let run = trd(&["denoise", "--model", s(&path), "--input", s(&img), "--output", s(&out), "--stages", "1"]);
    assert_eq!(code(&run), 1);
    assert_eq!(code(&trd(&["denoise", "--model", s(&path), "--input", s(&img), "--output", s(&out)])), 0);
}

#[test]
fn export_influence_writes_one_csv_per_filter() {
    let dir = TempDir::new().unwrap();
    let m = small_model(Task::Denoise { sigma: 25.0 }, 2);
    let path = dir.path().join("m.json");
    save_model(&m, &path).unwrap();
    let out = dir.path().join("csv");
    assert_eq!(code(&trd(&["export-influence", "--model", s(&path), "--out-dir", s(&out)])), 0);
    let mut names: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2 * 4);
    assert_eq!(names[0], "stage1_filter1.csv");

    let text = std::fs::read_to_string(out.join("stage2_filter3.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "z,phi,rho");
    assert_eq!(lines.len(), 1001);
    let row = |i: usize| -> Vec<f64> { lines[i].split(',').map(|v| v.parse().unwrap()).collect() };
    assert_eq!(row(1)[0], -310.0);
    assert_eq!(row(1000)[0], 310.0);
    let mid = row(500);
    assert!(mid[0].abs() < 0.32);
    // plain init: φ(1) ≈ 1, so φ is near 0 and ρ near its minimum at the origin
    assert!(mid[1].abs() < 0.7 && mid[2].abs() < 0.1, "{mid:?}");
}

#[test]
fn eval_prints_a_table_with_an_average() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("m.json");
    save_model(&small_model(Task::Denoise { sigma: 25.0 }, 1), &path).unwrap();
    let out = trd(&["eval", "--model", s(&path), "--data", s(&data("holdout"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("coins.pgm"));
    let avg: Vec<&str> = lines[3].split_whitespace().collect();
    assert_eq!(avg[0], "average");
    for v in &avg[1..] {
        assert_eq!(v.split('.').nth(1).map(str::len), Some(2), "{v}");
    }
}

#[test]
fn gradcheck_command_passes() {
    let out = trd(&["gradcheck", "--problem", "deblock-stage", "--instances", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("worst"));
    let strict = trd(&["gradcheck", "--instances", "1", "--tolerance", "1e-30"]);
    assert_eq!(code(&strict), 3);
}

#[test]
fn train_writes_model_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.json");
    let run = trd(&[
        "train", "--task", "denoise", "--sigma", "25", "--stages", "2", "--filter-size", "3", "--filters", "2",
        "--rbf-count", "15", "--mode", "joint", "--lbfgs-iters", "3", "--data", s(&data("train")),
        "--holdout", s(&data("holdout")), "--patch-size", "24", "--patches", "3", "--seed", "11", "--out", s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let model = load_model(&out).unwrap();
    assert_eq!(model.num_stages(), 2);
    assert_eq!(model.trained_mode, TrainedMode::Joint);

    let manifest = std::fs::read_to_string(dir.path().join("m.json.manifest.txt")).unwrap();
    for key in ["seed = 11", "rbf_count = 15", "lbfgs_memory = 10", "warm_start = ", "[greedy stage 2]", "[joint]", "[holdout]", "wall_time_s"] {
        assert!(manifest.contains(key), "missing `{key}` in\n{manifest}");
    }
}

#[test]
fn train_rejects_bad_shapes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.json");
    let train = data("train");
    let base = ["train", "--task", "denoise", "--data", s(&train), "--out", s(&out)];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        code(&trd(&v))
    };
    assert_eq!(with(&["--filter-size", "4"]), 1);
    assert_eq!(with(&["--filter-size", "3", "--filters", "9"]), 1);
    assert_eq!(with(&["--stages", "0"]), 1);
    assert_eq!(with(&["--sigma", "-1"]), 1);
    assert_eq!(with(&["--patches", "3"]), 1);
    assert!(!out.exists());
}
