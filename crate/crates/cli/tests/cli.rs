//! The `cxverb` binary: exit codes, determinism and file handling.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cxverb_audio::dsp::read_wav;
use cxverb_audio::simulate::{read_manifest, MANIFEST_NAME};

fn cxverb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxverb"))
        .args(args)
        .env("CXVERB_LOG", "error")
        .output()
        .expect("run cxverb")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, n: &str, seed: &str) {
    let out = cxverb(&["simulate", "--n", n, "--seed", seed, "--set", "source_seconds=1.5", "--out", path(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cxverb(&[])), 1);
    assert_eq!(code(&cxverb(&["denoise"])), 1);
    assert_eq!(code(&cxverb(&["simulate", "--frobnicate"])), 1);
    assert_eq!(code(&cxverb(&["simulate", "--preset", "huge"])), 1);
    let cfg = dir.path().join("run.txt");
    fs::write(&cfg, "seed = 1\nlearning_rate = 0.1\n").unwrap();
    let out = cxverb(&["simulate", "--config", path(&cfg), "--out", path(&dir.path().join("o"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    let enh = cxverb(&["enhance", "--out", path(&dir.path().join("e")), path(&cfg)]);
    assert_eq!(code(&enh), 1, "enhance without a model or --identity-mask");
}

#[test]
fn help_exits_0() {
    let out = cxverb(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("export-spec"));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.wav");
    fs::write(&bogus, b"not a wave file").unwrap();
    let out = cxverb(&["export-spec", "--out", path(&dir.path().join("spec")), path(&bogus)]);
    assert_eq!(code(&out), 2);
    let missing = cxverb(&["pretrain", "--data", path(&dir.path().join("nowhere")), "--out", path(&dir.path().join("p"))]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn divergent_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, "2", "3");
    let out = cxverb(&[
        "pretrain",
        "--data",
        path(&data),
        "--out",
        path(&dir.path().join("pre")),
        "--set",
        "pretrain_lr=1e300",
        "--set",
        "max_steps=6",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn simulate_is_deterministic_and_writes_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = cxverb(&["simulate", "--n", "6", "--seed", "7", "--out", path(d)]);
        assert_eq!(code(&out), 0);
    }
    let ma = fs::read(a.join(MANIFEST_NAME)).unwrap();
    assert_eq!(ma, fs::read(b.join(MANIFEST_NAME)).unwrap());
    let records = read_manifest(&a.join(MANIFEST_NAME)).unwrap();
    assert_eq!(records.len(), 6);
    for r in &records {
        assert_eq!(fs::read(a.join(&r.reverb_path)).unwrap(), fs::read(b.join(&r.reverb_path)).unwrap());
    }
    let resolved = fs::read_to_string(a.join("config.txt")).unwrap();
    assert!(resolved.contains("seed = 7") && resolved.contains("sources = 6") && resolved.contains("preset = toy"));

    let c = dir.path().join("c");
    assert_eq!(code(&cxverb(&["simulate", "--n", "6", "--seed", "8", "--out", path(&c)])), 0);
    assert_ne!(ma, fs::read(c.join(MANIFEST_NAME)).unwrap());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let out = cxverb(&["simulate", "--n", "2", "--seed", "5", "--t60", "0.4:0.5", "--snr", "15", "--out", path(&a)]);
    assert_eq!(code(&out), 0);
    let b = dir.path().join("b");
    let out = cxverb(&["simulate", "--config", path(&a.join("config.txt")), "--out", path(&b)]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(a.join(MANIFEST_NAME)).unwrap(), fs::read(b.join(MANIFEST_NAME)).unwrap());
    let r = &read_manifest(&b.join(MANIFEST_NAME)).unwrap()[0];
    assert!((0.4..=0.5).contains(&r.t60_s) && r.snr_db == 15.0);
}

#[test]
fn identity_mask_reproduces_input_and_leaves_it_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, "2", "11");
    let records = read_manifest(&data.join(MANIFEST_NAME)).unwrap();
    let before: Vec<Vec<u8>> = records.iter().map(|r| fs::read(data.join(&r.reverb_path)).unwrap()).collect();
    let out_dir = dir.path().join("enh");
    let out = cxverb(&["enhance", "--identity-mask", "--workers", "2", "--out", path(&out_dir), path(&data)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for (r, orig) in records.iter().zip(&before) {
        let input = data.join(&r.reverb_path);
        assert_eq!(&fs::read(&input).unwrap(), orig, "input modified");
        let (x, _) = read_wav(&input).unwrap();
        let (y, _) = read_wav(out_dir.join("enhanced").join(input.file_name().unwrap())).unwrap();
        assert_eq!(x.len(), y.len());
        let sig: f64 = x.iter().map(|v| v * v).sum();
        let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let snr = 10.0 * (sig / err.max(1e-300)).log10();
        assert!(snr >= 60.0, "{}: {snr:.1} dB", r.id);
    }
}

#[test]
fn enhance_refuses_to_overwrite_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, "1", "12");
    let out_dir = dir.path().join("run");
    let first = cxverb(&["enhance", "--identity-mask", "--out", path(&out_dir), path(&data)]);
    assert_eq!(code(&first), 0);
    let produced = out_dir.join("enhanced");
    let before = fs::read_dir(&produced).unwrap().count();
    let again = cxverb(&["enhance", "--identity-mask", "--out", path(&out_dir), path(&produced)]);
    assert_eq!(code(&again), 1);
    assert_eq!(fs::read_dir(&produced).unwrap().count(), before);
}

#[test]
fn evaluate_and_export_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, "2", "13");
    let run = dir.path().join("run");
    assert_eq!(code(&cxverb(&["enhance", "--identity-mask", "--out", path(&run), path(&data)])), 0);
    let out = cxverb(&["evaluate", "--data", path(&data), "--enhanced", path(&run.join("enhanced")), "--out", path(&run)]);
    assert_eq!(code(&out), 0);
    let table = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(table.contains("reverberant") && table.contains("enhanced"));
    let csv = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("fwsegsnr"));
    assert_eq!(csv.lines().filter(|l| l.contains("mean")).count(), 2);

    let wav = read_manifest(&data.join(MANIFEST_NAME)).unwrap()[0].reverb_file(&data);
    let spec = dir.path().join("spec");
    assert_eq!(code(&cxverb(&["export-spec", "--out", path(&spec), path(&wav)])), 0);
    let stem = wav.file_stem().unwrap().to_string_lossy().into_owned();
    let rows = fs::read_to_string(spec.join(format!("{stem}.csv"))).unwrap();
    let (n, _) = read_wav(&wav).unwrap();
    assert_eq!(rows.lines().count(), 1 + n.len() / 128);
    assert_eq!(rows.lines().next().unwrap().split(',').count(), 257);
    assert!(fs::read(spec.join(format!("{stem}.pgm"))).unwrap().starts_with(b"P5"));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cxverb(&["gradcheck", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gradient checks passed"));
}
