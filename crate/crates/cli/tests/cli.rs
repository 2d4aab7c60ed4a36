use std::path::Path;
use std::process::{Command, Output};

use panostitch::sampler::{init_canvas, RunManifest, SamplerConfig};
use panostitch::tensor::ptsr::write_raw;
use panostitch::tensor::{read_tensor, RawTensor, Rng};
use tempfile::TempDir;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panostitch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn panostitch")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = bin(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn identity_run_returns_initial_noise_crop() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "generate",
            "--backend",
            "mock:identity",
            "--steps",
            "5",
            "--seed",
            "7",
            "--prompt",
            "a lake",
            "--out",
            "o",
        ],
        dir.path(),
    );
    let jsyn = read_tensor(dir.path().join("o/jsyn.ptsr")).unwrap();
    let config = SamplerConfig {
        steps: 5,
        seed: 7,
        ..SamplerConfig::default()
    };
    let init = init_canvas(&config, &mut Rng::new(7)).unwrap();
    let expected = init.columns(config.height, 2 * config.height).unwrap();
    assert_eq!(jsyn, expected);

    let manifest = RunManifest::load(dir.path().join("o/manifest.json")).unwrap();
    assert_eq!(manifest.backend, "mock:identity");
    assert_eq!(
        manifest.conditioning.prompt_text(),
        Some("360-degree panoramic image, a lake")
    );
    assert_eq!(manifest.step_seconds.len(), 5);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| bin(args, dir.path()).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["generate", "--steps", "3"]), Some(1));
    assert_eq!(code(&["generate", "--backend", "mock:identity", "--bogus"]), Some(1));
    assert_eq!(
        code(&["generate", "--backend", "mock:identity", "--height", "0"]),
        Some(1)
    );
    assert_eq!(code(&["generate", "--backend", "mock:identity", "--png"]), Some(1));
    assert_eq!(
        code(&[
            "generate",
            "--backend",
            "http://127.0.0.1:9",
            "--steps",
            "2",
            "--retries",
            "0",
            "--timeout",
            "2"
        ]),
        Some(2)
    );
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"backend": "mock:blur=1", "height": 16, "steps": 3, "seed": 11, "mode": "multi"}"#,
    )
    .unwrap();
    ok(
        &["generate", "--config", "run.json", "--seed", "12", "--out", "o"],
        dir.path(),
    );
    let m = RunManifest::load(dir.path().join("o/manifest.json")).unwrap();
    assert_eq!(m.backend, "mock:blur=1");
    assert_eq!(m.config.height, 16);
    assert_eq!(m.config.canvas_width, 64);
    assert_eq!(m.config.seed, 12);
    assert_eq!(m.config.steps, 3);
    assert_eq!(m.config.stitch_passes, 2);

    std::fs::write(dir.path().join("bad.json"), r#"{"hieght": 16}"#).unwrap();
    assert_eq!(
        bin(&["generate", "--config", "bad.json"], dir.path()).status.code(),
        Some(1)
    );
}

#[test]
fn replay_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "generate",
            "--backend",
            "mock:noise",
            "--height",
            "16",
            "--steps",
            "6",
            "--seed",
            "3",
            "--stitch-order",
            "post",
            "--max-inflight",
            "3",
            "--out",
            "a",
        ],
        dir.path(),
    );
    ok(&["generate", "--replay", "a/manifest.json", "--out", "b"], dir.path());
    for f in ["j0.ptsr", "jsyn.ptsr"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn png_export_in_pixel_space() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "generate",
            "--backend",
            "mock:identity",
            "--pixel-space",
            "--height",
            "16",
            "--steps",
            "1",
            "--png",
            "--out",
            "o",
        ],
        dir.path(),
    );
    let jsyn = read_tensor(dir.path().join("o/jsyn.ptsr")).unwrap();
    assert_eq!(jsyn.shape(), (16, 32, 3));
    assert!(dir.path().join("o/jsyn.png").exists());
}

#[test]
fn ablation_over_strides() {
    let dir = TempDir::new().unwrap();
    let table = ok(
        &[
            "ablate",
            "--backend",
            "mock:blur",
            "--height",
            "16",
            "--steps",
            "4",
            "--param",
            "stride",
            "--values",
            "2,4,8",
            "--out",
            "ab",
        ],
        dir.path(),
    );
    assert_eq!(table.lines().count(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ab/ablation.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, v) in rows.iter().zip(["2", "4", "8"]) {
        assert_eq!(row["value"], v);
        assert!(row["seam_ratio"].as_f64().unwrap().is_finite());
        let m = RunManifest::load(dir.path().join(format!("ab/stride-{v}/manifest.json"))).unwrap();
        assert_eq!(m.config.stride.to_string(), v);
    }

    let out = ok(
        &[
            "ablate",
            "--backend",
            "mock:identity",
            "--height",
            "16",
            "--steps",
            "1",
            "--prompt",
            "dunes",
            "--param",
            "trigger-word",
            "--values",
            "none,wide view",
            "--out",
            "tw",
        ],
        dir.path(),
    );
    assert_eq!(out.lines().count(), 2);
    let none = RunManifest::load(dir.path().join("tw/trigger-word-none/manifest.json")).unwrap();
    assert_eq!(none.conditioning.prompt_text(), Some("dunes"));
    let wide = RunManifest::load(dir.path().join("tw/trigger-word-wide_view/manifest.json")).unwrap();
    assert_eq!(wide.conditioning.prompt_text(), Some("wide view, dunes"));

    assert_eq!(
        bin(
            &[
                "ablate",
                "--backend",
                "mock:identity",
                "--param",
                "stitch-order",
                "--values",
                "sideways"
            ],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
}

fn write_embeddings(path: &Path, rows: usize, dim: usize, seed: u64) {
    let mut rng = Rng::new(seed);
    let data = (0..rows * dim).map(|_| rng.standard_normal() as f32).collect();
    write_raw(&RawTensor::new(vec![rows, dim], data).unwrap(), path).unwrap();
}

#[test]
fn eval_metrics_from_files() {
    let dir = TempDir::new().unwrap();
    write_embeddings(&dir.path().join("a.ptsr"), 40, 4, 1);
    write_embeddings(&dir.path().join("b.ptsr"), 40, 4, 2);

    let same: serde_json::Value =
        serde_json::from_str(&ok(&["eval", "fid", "--gen", "a.ptsr", "--real", "a.ptsr"], dir.path())).unwrap();
    assert!(same["fid"].as_f64().unwrap().abs() < 1e-6);
    let clip: serde_json::Value = serde_json::from_str(&ok(
        &["eval", "clip-score", "--gen", "a.ptsr", "--real", "a.ptsr"],
        dir.path(),
    ))
    .unwrap();
    assert!((clip["clip_score"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    ok(
        &[
            "generate",
            "--backend",
            "mock:blur",
            "--height",
            "16",
            "--steps",
            "3",
            "--out",
            "o",
        ],
        dir.path(),
    );
    ok(
        &[
            "eval",
            "report",
            "--gen",
            "a.ptsr,b.ptsr",
            "--real",
            "a.ptsr",
            "--panoramas",
            "o/jsyn.ptsr,o/jsyn.ptsr",
            "--embedding-source",
            "test-embedder",
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["repeats"], 2);
    assert_eq!(report["embedding_source"], "test-embedder");
    assert_eq!(report["seam_ratio"]["std"], 0.0);
}

#[test]
fn crop_is_reproducible_from_locations() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "generate",
            "--backend",
            "mock:identity",
            "--height",
            "16",
            "--steps",
            "1",
            "--out",
            "o",
        ],
        dir.path(),
    );
    ok(
        &[
            "eval",
            "crop",
            "--images",
            "o/jsyn.ptsr,o/j0.ptsr",
            "--count",
            "9",
            "--size",
            "8",
            "--seed",
            "5",
            "--locations",
            "locs.json",
            "--out",
            "p1.ptsr",
        ],
        dir.path(),
    );
    ok(
        &[
            "eval",
            "crop",
            "--images",
            "o/jsyn.ptsr,o/j0.ptsr",
            "--size",
            "8",
            "--locations",
            "locs.json",
            "--reuse",
            "--out",
            "p2.ptsr",
        ],
        dir.path(),
    );
    let p1 = std::fs::read(dir.path().join("p1.ptsr")).unwrap();
    assert_eq!(p1, std::fs::read(dir.path().join("p2.ptsr")).unwrap());
    let info: serde_json::Value = serde_json::from_str(&ok(&["inspect", "p1.ptsr"], dir.path())).unwrap();
    assert_eq!(info["dims"], serde_json::json!([9, 8, 8, 4]));
}

#[test]
fn prep_captions_rewrites_lines() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("in.txt"),
        "a 3 6 0 picture of a city\n  , mountains ,, lake\n",
    )
    .unwrap();
    ok(&["prep-captions", "--in", "in.txt", "--out", "out.txt"], dir.path());
    let out = std::fs::read_to_string(dir.path().join("out.txt")).unwrap();
    assert_eq!(
        out,
        "360-degree panoramic image, a of a city\n360-degree panoramic image, mountains, lake\n"
    );
}
