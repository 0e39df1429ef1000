//! End-to-end runs of the command-line tool on a miniature profile.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use audinv::checkpoint::{load_classifier, load_generator, load_mapper};
use audinv::experiment::{cmd_evaluate, cmd_train, ExperimentConfig, TrainTarget};
use audinv::wav::{load_wav, save_wav};
use audinv_core::audio::{AudioClip, SAMPLE_RATE};
use audinv_core::generator::GeneratorArch;
use audinv_core::profile::Profile;
use proptest::prelude::*;

/// A profile small enough to train every stage in a few seconds.
fn tiny_config(out: &Path) -> ExperimentConfig {
    let mut p = Profile::toy();
    p.generator = GeneratorArch { latent_dim: 4, model_dim: 2, layers: 2 };
    p.clip_length = p.generator.output_length();
    p.spectrogram.window_size = 32;
    p.spectrogram.hop = 16;
    p.gan.steps = 3;
    p.gan.batch_size = 4;
    p.gan.critic_steps = 1;
    p.gan.checkpoint_every = 2;
    p.gan.critic_model_dim = 2;
    p.classifier_arch.widths = [2, 2, 2, 2];
    p.classifier.max_steps = Some(3);
    p.classifier.batch_size = 8;
    p.inverter_arch.widths = [2, 2, 2, 2];
    p.inverter_arch.outputs = p.generator.latent_dim;
    p.inverter.max_steps = Some(4);
    p.inverter.batch_size = 4;
    p.gd_steps = 5;
    p.hybrid_steps = 2;
    p.num_targets = 2;
    p.inception_splits = 2;
    p.synthetic_per_class = 10;
    ExperimentConfig { profile: p, seed: 3, data_dir: None, out: out.to_path_buf(), workers: 2, figures: 1 }
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&tiny_config(&dir.join("run"))).unwrap()).unwrap();
    path
}

fn audinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audinv")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

#[test]
fn cli_trains_evaluates_reports_and_inverts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let config = config.to_str().unwrap();

    let early = audinv(&["train", "inverter", "--config", config]);
    assert!(!early.status.success());
    let msg = String::from_utf8_lossy(&early.stderr);
    assert!(msg.contains("gan checkpoint"), "{msg}");

    for target in ["gan", "classifier", "inverter"] {
        let out = audinv(&["train", target, "--config", config]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let run = tmp.path().join("run");
    let ckpt = run.join("checkpoints");
    let (g, gm) = load_generator(&ckpt.join("gan")).unwrap();
    assert_eq!(g.output_length(), 256);
    assert_eq!(gm.seed, 3);
    load_classifier(&ckpt.join("classifier")).unwrap();
    load_mapper(&ckpt.join("inverter")).unwrap();

    let out = audinv(&["evaluate", "--config", config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = run.join("results");
    for src in ["fake", "real"] {
        let names = files_in(&results.join("inversions").join(src));
        // Two targets, three methods, a wav and a json sidecar each.
        assert_eq!(names.len(), 12, "{names:?}");
        assert!(names.contains(&"0001_hybrid.json".to_string()));
        let csv = fs::read_to_string(results.join(format!("{src}_table.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 5, "{csv}");
        assert_eq!(csv.lines().next().unwrap().contains("accuracy"), src == "real");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(results.join("fake_table.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["seed"], 3);
    assert_eq!(json["provenance"]["checkpoints"].as_object().unwrap().len(), 3);

    let out = audinv(&["report", run.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("hybrid never worse"), "{text}");
    assert!(text.contains("Real audio reconstructions"));

    let input = tmp.path().join("input.wav");
    let clip = AudioClip::new((0..256).map(|t| (t as f32 * 0.3).sin() * 0.4).collect(), SAMPLE_RATE).unwrap();
    save_wav(&input, &clip).unwrap();
    let stem = tmp.path().join("inv").join("rec");
    let out = audinv(&[
        "invert",
        input.to_str().unwrap(),
        "--method",
        "gradient",
        "--output",
        stem.to_str().unwrap(),
        "--config",
        config,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_wav(&stem.with_extension("wav"), 256).unwrap().len(), 256);
    let rec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(rec["method"], "gradient");
}

#[test]
fn evaluation_needs_checkpoints_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let err = cmd_evaluate(&cfg).unwrap_err();
    assert!(format!("{err:#}").contains("missing"), "{err:#}");
    for t in [TrainTarget::Gan, TrainTarget::Classifier, TrainTarget::Inverter] {
        cmd_train(&cfg, t).unwrap();
    }
    let read = || ["fake_table.csv", "real_table.csv"].map(|f| fs::read(cfg.results_dir().join(f)).unwrap());
    cmd_evaluate(&cfg).unwrap();
    let first = read();
    let serial = ExperimentConfig { workers: 1, ..cfg.clone() };
    cmd_evaluate(&serial).unwrap();
    assert_eq!(read(), first, "worker count must not change the tables");
}

#[test]
fn report_rejects_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = audinv(&["report", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no evaluation results"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wav_round_trip_within_quantization(samples in prop::collection::vec(-1.0f32..=1.0, 1..200)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let clip = AudioClip::new(samples.clone(), SAMPLE_RATE).unwrap();
        save_wav(&path, &clip).unwrap();
        let back = load_wav(&path, samples.len()).unwrap();
        for (a, b) in samples.iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 2f32.powi(-15), "{a} vs {b}");
        }
    }
}
