use std::path::Path;
use std::process::ExitCode;

use serde_json::Value;

use oam_transcoder::cli::main_from;

fn run(args: &[&str]) -> ExitCode {
    main_from(std::iter::once("transcoder").chain(args.iter().copied()))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn manifest_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["simulate-forward", "--out", &out_arg(dir.path())]),
        ExitCode::SUCCESS
    );
    let m = read_json(&dir.path().join("manifest.json"));
    let mut listed: Vec<String> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    listed.sort();
    let mut found: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    found.sort();
    assert_eq!(listed, found);
    assert_eq!(m["scenario"], "forward");
    assert_eq!(m["profile"], "paper-2016");
}

#[test]
fn seed_flag_reaches_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["visibility", "--seed", "42", "--out", &out_arg(dir.path())]),
        ExitCode::SUCCESS
    );
    assert_eq!(read_json(&dir.path().join("manifest.json"))["seed"], 42);
}

#[test]
fn identical_runs_are_byte_identical() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = cfg_dir.path().join("run.toml");
    std::fs::write(&cfg, "[mz]\nintensity_jitter = 0.05\njitter_runs = 10\n").unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let code = run(&[
            "visibility",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            &out_arg(d.path()),
        ]);
        assert_eq!(code, ExitCode::SUCCESS);
    }
    for f in [
        "readout.csv",
        "summary.json",
        "manifest.json",
        "reverse_projection.csv",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn bad_parameter_writes_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[cavity]\nd_mm = 0.0\n").unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "cavity-spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &out_arg(&out),
    ]);
    assert_eq!(code, ExitCode::FAILURE);
    let e = read_json(&out.join("error.json"));
    assert_eq!(e["error"], "invalid_parameter");
    assert_eq!(e["field"], "cavity.d_mm");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[cavity]\nfinesse = 60\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&[
            "crosstalk",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            &out_arg(&out)
        ]),
        ExitCode::FAILURE
    );
    assert!(read_json(&out.join("error.json"))["message"]
        .as_str()
        .unwrap()
        .contains("finesse"));
}

#[test]
fn zero_workers_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["sweep", "--workers", "0", "--out", &out_arg(dir.path())]),
        ExitCode::FAILURE
    );
    assert_eq!(
        read_json(&dir.path().join("error.json"))["field"],
        "--workers"
    );
}

#[test]
fn sweep_merge_ignores_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["sweep", "--workers", "1", "--out", &out_arg(a.path())]),
        ExitCode::SUCCESS
    );
    assert_eq!(
        run(&["sweep", "--workers", "4", "--out", &out_arg(b.path())]),
        ExitCode::SUCCESS
    );
    let merged = std::fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(
        merged,
        std::fs::read_to_string(b.path().join("sweep.csv")).unwrap()
    );
    let idx: Vec<usize> = merged
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(idx, (0..idx.len()).collect::<Vec<_>>());
    assert_eq!(idx.len(), 11);
}

#[test]
fn ideal_profile_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&[
            "simulate-reverse",
            "--profile",
            "ideal",
            "--out",
            &out_arg(dir.path())
        ]),
        ExitCode::SUCCESS
    );
    assert_eq!(
        read_json(&dir.path().join("manifest.json"))["profile"],
        "ideal"
    );
}

#[test]
fn unknown_profile_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&[
            "crosstalk",
            "--profile",
            "lab-2030",
            "--out",
            &out_arg(dir.path())
        ]),
        ExitCode::FAILURE
    );
    assert!(dir.path().join("error.json").exists());
}
