//! The `hccr` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use hccr::checkpoint::load_checkpoint;
use hccr::metrics::parse_metrics;
use hccr_core::model::{build_model, ModelConfig};
use hccr_core::rng::streams;
use hccr_core::RngStream;

fn hccr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hccr")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("p.pack");
    let out = hccr(&["synth", p(&pack), "--classes", "10", "--per-class", "40", "--seed", "7"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = hccr(&["stats", p(&pack)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("classes 10"), "{text}");
    assert!(text.contains("samples 400"), "{text}");
    assert!(text.contains("mean 40.0"), "{text}");
}

#[test]
fn class_deficit_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("p.pack");
    assert!(hccr(&["synth", p(&pack), "--classes", "50", "--per-class", "2"]).status.success());
    let ckpt = dir.path().join("m.ckpt");
    let out = hccr(&["train", "--variant", "b", "--pack", p(&pack), "--steps", "1", "--out", p(&ckpt)]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("needs 90 classes") && err.contains("40 short"), "{err}");
    assert!(!ckpt.exists());

    let out = hccr(&[
        "train", "--variant", "b", "--pack", p(&pack), "--steps", "1", "--out", p(&ckpt),
        "--arch", "desk", "--classes-per-batch", "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(ckpt.exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = hccr(&["stats", "--bogus", "x"]);
    assert!(!out.status.success());
    let out = hccr(&["stats", "/definitely/not/here.pack"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("not/here.pack"), "{err}");
    let out = hccr(&["train", "--variant", "z", "--pack", "x", "--out", "y"]);
    assert!(!out.status.success());
    let out = hccr(&["train", "--variant", "a", "--pack", "x", "--out", "y", "--classes-per-batch", "3"]);
    assert!(!out.status.success());
}

#[test]
fn zero_steps_writes_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("p.pack");
    assert!(hccr(&["synth", p(&pack), "--classes", "3", "--per-class", "4"]).status.success());
    let ckpt = dir.path().join("m.ckpt");
    let out = hccr(&[
        "train", "--variant", "a", "--pack", p(&pack), "--steps", "0", "--seed", "11", "--out", p(&ckpt), "--arch", "desk",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let init = build_model(&ModelConfig::desk(3), &mut RngStream::fork(11, streams::INIT)).unwrap();
    assert_eq!(load_checkpoint(&ckpt).unwrap(), init);
    assert_eq!(std::fs::read_to_string(dir.path().join("m.metrics.jsonl")).unwrap(), "");
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("p.pack");
    let held = dir.path().join("h.pack");
    assert!(hccr(&["synth", p(&pack), "--classes", "4", "--per-class", "6", "--seed", "1"]).status.success());
    assert!(hccr(&["synth", p(&held), "--classes", "4", "--per-class", "3", "--seed", "2"]).status.success());
    let ckpt = dir.path().join("m.ckpt");
    let metrics = dir.path().join("m.jsonl");
    let out = hccr(&[
        "train", "--variant", "c", "--pack", p(&pack), "--steps", "4", "--lr", "0.02", "--seed", "3",
        "--out", p(&ckpt), "--metrics", p(&metrics), "--arch", "desk",
        "--classes-per-batch", "2", "--samples-per-class", "3", "--eval-every", "2", "--eval-pack", p(&held),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = parse_metrics(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    let steps: Vec<_> = lines.iter().filter(|l| l.total_loss.is_some()).collect();
    let evals: Vec<_> = lines.iter().filter_map(|l| l.recognition_rate.map(|r| (l.step, r))).collect();
    assert_eq!(steps.len(), 4);
    assert_eq!(evals.iter().map(|e| e.0).collect::<Vec<_>>(), vec![2, 4]);
    for l in &steps {
        let (t, ce, sim) = (l.total_loss.unwrap(), l.ce_loss.unwrap(), l.sim_loss.unwrap());
        assert!((ce + sim - t).abs() <= 1e-9, "{l:?}");
    }

    let out = hccr(&["eval", "--checkpoint", p(&ckpt), "--pack", p(&held)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rate: f64 = stdout(&out).trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((rate - evals[1].1).abs() < 1e-6, "{rate} vs {:?}", evals);

    let other = dir.path().join("o.pack");
    assert!(hccr(&["synth", p(&other), "--classes", "5", "--per-class", "2"]).status.success());
    let out = hccr(&["eval", "--checkpoint", p(&ckpt), "--pack", p(&other)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("classes"));
}

#[test]
fn gradcheck_reports_every_op() {
    let out = hccr(&["gradcheck"]);
    let text = stdout(&out);
    for op in ["add", "matmul", "conv2d", "maxpool2d", "leaky_relu", "dropout", "softmax_cross_entropy", "variance_loss", "tiny_model_c"] {
        assert!(text.lines().any(|l| l.starts_with(op)), "{op} missing from\n{text}");
    }
}
