use std::path::Path;
use std::process::{Command, Output};

use hdrestore::audio::{read_wav, write_wav, AudioBuffer};

fn hdrestore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdrestore")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_clean(dir: &Path, names: &[&str]) {
    std::fs::create_dir_all(dir).unwrap();
    for (k, name) in names.iter().enumerate() {
        let f = 200.0 + 90.0 * k as f64;
        let x: Vec<f64> = (0..16_000)
            .map(|i| {
                let t = i as f64 / 16_000.0;
                0.3 * (2.0 * std::f64::consts::PI * f * t).sin() * (0.6 + 0.4 * (7.0 * t).sin())
            })
            .collect();
        write_wav(dir.join(name), &AudioBuffer::new(x, 16_000)).unwrap();
    }
}

#[test]
fn verify_params_passes() {
    let o = hdrestore(&["verify", "--suite", "params"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn usage_errors_do_not_look_like_io_errors() {
    let o = hdrestore(&["verify", "--bogus"]);
    assert_eq!(code(&o), 1);
    let o = hdrestore(&["verify", "--suite", "nonsense"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_manifest_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = hdrestore(&["train", "--manifest", "/nonexistent/manifest.tsv", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn empty_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    std::fs::create_dir_all(&clean).unwrap();
    let out = dir.path().join("out");
    let o = hdrestore(&["simulate", "--clean-dir", clean.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    write_clean(&clean, &["a.wav"]);
    let o = hdrestore(&[
        "simulate",
        "--clean-dir",
        clean.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--count",
        "0",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_train_restore_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    write_clean(&dir.path().join("clean"), &["a.wav", "b.wav"]);

    let o = hdrestore(&["simulate", "--clean-dir", &p("clean"), "--out-dir", &p("corpus"), "--subset", "N", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = p("corpus/manifest.tsv");
    assert!(Path::new(&manifest).exists());

    let o = hdrestore(&[
        "train",
        "--manifest",
        &manifest,
        "--out",
        &p("run"),
        "--set",
        "model.hidden=2",
        "--set",
        "model.depth=2",
        "--set",
        "model.refinement_dilations=1,3",
        "--set",
        "train.total_steps=2",
        "--set",
        "train.warm_phase_steps=1",
        "--set",
        "train.batch_size=1",
        "--set",
        "train.segment_samples=4000",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = p("run/final.hdrs");
    assert!(Path::new(&ckpt).exists());
    let metrics = std::fs::read_to_string(p("run/metrics.tsv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    let saved = std::fs::read_to_string(p("run/config.ini")).unwrap();
    assert!(saved.contains("hidden = 2") || saved.contains("hidden=2"));

    // Directory input mirrors file names and the trace is written alongside.
    let o = hdrestore(&["restore", "--ckpt", &ckpt, "--in", &p("clean"), "--out", &p("restored"), "--dump-trace"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["a", "b"] {
        let y: AudioBuffer<f64> = read_wav(p(&format!("restored/{name}.wav"))).unwrap();
        assert_eq!(y.len(), 16_000);
        let mask: AudioBuffer<f32> = read_wav(p(&format!("restored/{name}.mask.wav"))).unwrap();
        assert!(!mask.is_empty());
        assert!(mask.samples.iter().all(|v| (0.0..=1.0).contains(v)));
        let w: AudioBuffer<f32> = read_wav(p(&format!("restored/{name}.w.wav"))).unwrap();
        assert!(w.samples.iter().all(|v| *v > 0.0 && *v < 1.0));
        let pgm = std::fs::read(p(&format!("restored/{name}.restored.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n"));
    }

    let o = hdrestore(&["evaluate", "--ckpt", &ckpt, "--manifest", &manifest, "--report", &p("report.tsv")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(&p("report.tsv")).exists());
}
