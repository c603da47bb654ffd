//! End-to-end CLI tests: the five-stage workflow on tiny budgets, config
//! precedence, and the documented failure exits.

use std::path::PathBuf;
use std::process::{Command, Output};

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("latline_pipeline_{tag}"));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn latline(dir: &PathBuf, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latline"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch binary")
}

fn ok(dir: &PathBuf, args: &[&str]) -> String {
    let out = latline(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn five_stage_workflow_produces_artifacts() {
    let dir = tmp_dir("workflow");
    ok(
        &dir,
        &["gen-demos", "--env", "cartpole-swingup", "--count", "15", "--seed", "3", "--out", "demos"],
    );
    let stdout = ok(
        &dir,
        &[
            "train-embed", "--demos", "demos/demos.jsonl", "--seeds", "2", "--steps", "150",
            "--eval-every", "75", "--z-dim", "3", "--out", "embed",
        ],
    );
    assert!(stdout.contains("best seed"), "missing selection line: {stdout}");
    ok(
        &dir,
        &["eval-embed", "--model", "embed/best.json", "--demos", "demos/demos.jsonl", "--out", "eval"],
    );
    for (mode, extra, out) in [
        ("raw", None, "rl_raw"),
        ("augmented", Some("embed/best.json"), "rl_aug"),
    ] {
        let mut args = vec![
            "train-rl", "--env", "cartpole-swingup", "--mode", mode, "--seeds", "3",
            "--updates", "8", "--episodes-per-update", "4", "--out", out,
        ];
        if let Some(ckpt) = extra {
            args.extend(["--embedding", ckpt]);
        }
        ok(&dir, &args);
    }
    let table = ok(&dir, &["compare", "rl_raw", "rl_aug", "--out", "cmp"]);
    assert!(table.contains("cartpole-swingup/raw"));
    assert!(table.contains("cartpole-swingup/augmented"));

    // Every stage directory carries its run manifest; outputs exist.
    for (d, file) in [
        ("demos", "demos.jsonl"),
        ("embed", "best.json"),
        ("eval", "eval.csv"),
        ("rl_raw", "sweep.csv"),
        ("rl_aug", "sweep.csv"),
        ("cmp", "compare.csv"),
    ] {
        assert!(dir.join(d).join(file).exists(), "{d}/{file} missing");
        assert!(dir.join(d).join("run_manifest.json").exists(), "{d} manifest missing");
    }

    let compare_csv = std::fs::read_to_string(dir.join("cmp/compare.csv")).unwrap();
    assert!(compare_csv.starts_with("config,mean_final,band_low,band_high,best_ever,final_variance,seeds"));
    assert_eq!(compare_csv.lines().count(), 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn flags_override_config_file() {
    let dir = tmp_dir("precedence");
    std::fs::write(
        dir.join("gen.json"),
        r#"{"env": "reacher", "count": 4, "seed": 9}"#,
    )
    .unwrap();
    // Flag count=6 wins over config count=4; env comes from the file.
    ok(
        &dir,
        &["gen-demos", "--config", "gen.json", "--count", "6", "--out", "demos"],
    );
    let manifest = std::fs::read_to_string(dir.join("demos/manifest.json")).unwrap();
    assert!(manifest.contains("\"env_id\": \"reacher\""));
    assert!(manifest.contains("\"requested\": 6"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn manifest_config_snapshot_reproduces_outputs() {
    // Feeding a run manifest's config snapshot back in gives byte-identical
    // CSVs.
    let dir = tmp_dir("manifest_rt");
    ok(
        &dir,
        &["gen-demos", "--env", "cartpole-swingup", "--count", "10", "--seed", "2", "--out", "demos"],
    );
    ok(
        &dir,
        &[
            "train-embed", "--demos", "demos/demos.jsonl", "--seeds", "2", "--steps", "120",
            "--eval-every", "60", "--out", "embed_flags",
        ],
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("embed_flags/run_manifest.json")).unwrap())
            .unwrap();
    std::fs::write(
        dir.join("snapshot.json"),
        serde_json::to_string(&manifest["config"]).unwrap(),
    )
    .unwrap();
    ok(
        &dir,
        &[
            "train-embed", "--demos", "demos/demos.jsonl", "--config", "snapshot.json",
            "--out", "embed_snapshot",
        ],
    );
    for name in ["log_seed0.csv", "log_seed1.csv", "best.json"] {
        let a = std::fs::read(dir.join("embed_flags").join(name)).unwrap();
        let b = std::fs::read(dir.join("embed_snapshot").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs after config round-trip");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_errors_exit_2_and_gate_failures_exit_1() {
    let dir = tmp_dir("exits");

    // Unknown config key.
    std::fs::write(dir.join("bad.json"), r#"{"zdim": 3}"#).unwrap();
    let out = latline(
        &dir,
        &["train-embed", "--config", "bad.json", "--demos", "x.jsonl", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zdim"));

    // Missing input file, named explicitly.
    let out = latline(
        &dir,
        &["train-embed", "--demos", "nothere.jsonl", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothere.jsonl"));

    // Unknown flag is a clap usage error.
    let out = latline(&dir, &["gen-demos", "--nonsense", "1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));

    // Unreachable success floor is a gate failure.
    let out = latline(
        &dir,
        &[
            "gen-demos", "--env", "reacher", "--count", "2", "--success-floor", "1.5",
            "--out", "demos",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("success rate"));
    std::fs::remove_dir_all(&dir).ok();
}
