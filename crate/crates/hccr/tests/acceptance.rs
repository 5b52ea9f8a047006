//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run all: `cargo test -p hccr --test acceptance`.
//! Run some: `cargo test -p hccr --test acceptance -- 2 5`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hccr::gnt::{parse_gnt, serialize_gnt};
use hccr::Error;
use hccr_core::autodiff::Tape;
use hccr_core::dataset::{preprocess, synth_dataset, DatasetPack, GntRecord, TagCode, IMAGE_PIXELS, IMAGE_SIDE};
use hccr_core::gradcheck::suite::{model_suite, op_suite, SuiteEntry};
use hccr_core::losses::{
    combined_loss, euclidean_pair_loss, kl_divergence, softmax_cross_entropy, variance_loss, LossKind, LossVariant,
    ProbabilityVector,
};
use hccr_core::sampler::{sample_class_groups, sample_class_pairs, sample_uniform, Batch, BatchStructure};
use hccr_core::train::{evaluate, intra_class_distance, intra_class_variance, predict, StepRecord, TrainConfig, Trainer};
use hccr_core::{RngStream, Tensor};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn suite_line(entries: &[SuiteEntry]) -> (f64, f64, String) {
    let worst = entries.iter().max_by(|a, b| a.report.max_rel_error.total_cmp(&b.report.max_rel_error)).unwrap();
    let resolved = entries.iter().map(|e| e.report.max_rel_error_resolved).fold(0.0, f64::max);
    (worst.report.max_rel_error, resolved, worst.name.clone())
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let ops = op_suite(100, 2024).expect("op suite runs");
    let model = model_suite(100, 2024).expect("model suite runs");
    let elapsed = start.elapsed();
    for e in ops.iter().chain(&model) {
        println!(
            "    {:<24} max rel {:.3e}  resolved {:.3e}  checked {:>6}  skipped {:>4}  unresolved {:>4}",
            e.name, e.report.max_rel_error, e.report.max_rel_error_resolved, e.report.checked, e.report.skipped, e.report.unresolved
        );
    }
    let (op_worst, _, op_name) = suite_line(&ops);
    let (model_worst, model_resolved, model_name) = suite_line(&model);
    let trials = ops.iter().chain(&model).map(|e| e.trials).min().unwrap();
    let pass = op_worst <= 1e-4 && model_worst <= 1e-4 && trials >= 100 && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "ops max rel {op_worst:.2e} ({op_name}), tiny model max rel {model_worst:.2e} ({model_name}; {model_resolved:.2e} over \
             gradients above finite-difference resolution), {trials} trials, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Straight-from-formula references, no shared code with the library.
mod reference {
    pub fn softmax_ce(logits: &[f64], k: usize, labels: &[usize]) -> f64 {
        let m = labels.len();
        let mut total = 0.0;
        for (row, &y) in logits.chunks(k).zip(labels) {
            let denom: f64 = row.iter().map(|z| z.exp()).sum();
            total += -(row[y].exp() / denom).ln();
        }
        total / m as f64
    }

    pub fn euclidean(x: &[f64], d: usize) -> f64 {
        let rows: Vec<&[f64]> = x.chunks(d).collect();
        let pairs = rows.len() / 2;
        let mut total = 0.0;
        for k in 0..pairs {
            let (a, b) = (rows[2 * k], rows[2 * k + 1]);
            total += a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        }
        total / pairs as f64
    }

    pub fn variance(x: &[f64], d: usize, blocks: usize, per_block: usize) -> f64 {
        let mut total = 0.0;
        for c in 0..blocks {
            for j in 0..d {
                let col: Vec<f64> = (0..per_block).map(|i| x[(c * per_block + i) * d + j]).collect();
                let mu = col.iter().sum::<f64>() / per_block as f64;
                total += col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / per_block as f64;
            }
        }
        total / (blocks * d) as f64
    }
}

fn loss_oracles() -> Outcome {
    let mut rng = RngStream::new(31);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, got: f64, want: f64| {
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max((got - want).abs());
    };
    for _ in 0..1000 {
        let pairs = 1 + rng.index(4);
        let (blocks, per_block) = (1 + rng.index(3), 1 + rng.index(4));
        let d = 1 + rng.index(6);
        let k = 2 + rng.index(6);
        let scale = rng.uniform_in(0.1, 5.0);

        let m = 2 * pairs;
        let logits: Vec<f64> = (0..m * k).map(|_| scale * rng.normal()).collect();
        let labels: Vec<usize> = (0..m).map(|_| rng.index(k)).collect();
        let feats: Vec<f64> = (0..m * d).map(|_| scale * rng.normal()).collect();
        let lambda = rng.uniform_in(0.0, 2.0);
        let pairs_s = BatchStructure::Pairs { classes_per_batch: pairs };

        let mut tape = Tape::new();
        let z = tape.constant(Tensor::new(&[m, k], logits.clone()).unwrap());
        let f = tape.constant(Tensor::new(&[m, d], feats.clone()).unwrap());
        let ce = softmax_cross_entropy(&mut tape, z, &labels).unwrap();
        let eu = euclidean_pair_loss(&mut tape, f, &pairs_s).unwrap();
        let variant = LossVariant::new(LossKind::SoftmaxPlusEuclidean, lambda).unwrap();
        let comb = combined_loss(&mut tape, &variant, z, f, &labels, &pairs_s).unwrap();
        let ce_ref = reference::softmax_ce(&logits, k, &labels);
        let eu_ref = reference::euclidean(&feats, d);
        note("softmax_cross_entropy", tape.value(ce).item().unwrap(), ce_ref);
        note("euclidean_pair_loss", tape.value(eu).item().unwrap(), eu_ref);
        note("combined_loss", tape.value(comb.total).item().unwrap(), ce_ref + lambda * eu_ref);

        let n = blocks * per_block;
        let vlogits: Vec<f64> = (0..n * k).map(|_| scale * rng.normal()).collect();
        let vlabels: Vec<usize> = (0..n).map(|i| (i / per_block) % k).collect();
        let vfeats: Vec<f64> = (0..n * d).map(|_| scale * rng.normal()).collect();
        let groups = BatchStructure::Groups { classes_per_batch: blocks, samples_per_class: per_block };
        let z = tape.constant(Tensor::new(&[n, k], vlogits.clone()).unwrap());
        let f = tape.constant(Tensor::new(&[n, d], vfeats.clone()).unwrap());
        let var = variance_loss(&mut tape, f, &groups).unwrap();
        let variant = LossVariant::new(LossKind::SoftmaxPlusVariance, lambda).unwrap();
        let comb = combined_loss(&mut tape, &variant, z, f, &vlabels, &groups).unwrap();
        let var_ref = reference::variance(&vfeats, d, blocks, per_block);
        note("variance_loss", tape.value(var).item().unwrap(), var_ref);
        note(
            "combined_loss",
            tape.value(comb.total).item().unwrap(),
            reference::softmax_ce(&vlogits, k, &vlabels) + lambda * var_ref,
        );
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(max <= 1e-10 && worst.len() == 4, format!("1000 random inputs; max abs error: {detail}"))
}

// ---------------------------------------------------------------- 3

fn known_values() -> Outcome {
    let mut ce_worst = 0.0f64;
    for k in 2..=10 {
        for label in 0..k {
            let mut tape = Tape::new();
            let z = tape.constant(Tensor::new(&[1, k], vec![0.7; k]).unwrap());
            let l = softmax_cross_entropy(&mut tape, z, &[label]).unwrap();
            ce_worst = ce_worst.max((tape.value(l).item().unwrap() - (k as f64).ln()).abs());
        }
    }
    let p = ProbabilityVector::new(vec![0.3, 0.7]).unwrap();
    let kl = kl_divergence(&p, &p).unwrap();

    let mut tape = Tape::new();
    let v = tape.constant(Tensor::new(&[2, 1], vec![1.0, 3.0]).unwrap());
    let groups = BatchStructure::Groups { classes_per_batch: 1, samples_per_class: 2 };
    let var = variance_loss(&mut tape, v, &groups).unwrap();
    let var = tape.value(var).item().unwrap();
    let x = tape.constant(Tensor::new(&[2, 2], vec![0.0, 0.0, 3.0, 4.0]).unwrap());
    let dist = euclidean_pair_loss(&mut tape, x, &BatchStructure::Pairs { classes_per_batch: 1 }).unwrap();
    let dist = tape.value(dist).item().unwrap();

    let pass = ce_worst <= 1e-12 && kl == 0.0 && (var - 1.0).abs() <= 1e-15 && (dist - 5.0).abs() <= 1e-15;
    outcome(pass, format!("CE vs ln k max error {ce_worst:.1e}; KL(p||p) {kl}; variance {{1,3}} {var}; distance {dist}"))
}

// ---------------------------------------------------------------- 4

/// Pack with uneven class sizes (1..=60 samples) and blank images.
fn skewed_pack(classes: usize) -> DatasetPack {
    let tags = (0..classes).map(|c| TagCode::from_u16(0xB0A1 + c as u16)).collect();
    let mut labels = Vec::new();
    for c in 0..classes {
        let n = 1 + (c * 37) % 60;
        labels.extend(std::iter::repeat(c as u32).take(n));
    }
    let pixels = vec![0u8; labels.len() * IMAGE_PIXELS];
    DatasetPack::from_parts(tags, labels, pixels).unwrap()
}

/// Independent check of a batch against the pack and the requested layout.
fn batch_ok(pack: &DatasetPack, b: &Batch, blocks: usize, per_block: usize) -> bool {
    if b.sample_indices.len() != blocks * per_block || b.labels.len() != b.sample_indices.len() {
        return false;
    }
    if b.sample_indices.iter().zip(&b.labels).any(|(&i, &l)| i >= pack.len() || pack.label(i) != l) {
        return false;
    }
    let mut seen = std::collections::HashSet::new();
    for block in b.labels.chunks(per_block) {
        if block.iter().any(|&l| l != block[0]) || !seen.insert(block[0]) {
            return false;
        }
    }
    for (block, idx) in b.labels.chunks(per_block).zip(b.sample_indices.chunks(per_block)) {
        let size = pack.class_samples(block[0]).len();
        let mut distinct = idx.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let without_replacement = distinct.len() == per_block;
        if size >= per_block && !without_replacement {
            return false;
        }
    }
    seen.len() == blocks
}

fn sampler_invariants() -> Outcome {
    let pack = skewed_pack(120);
    let mut failures = 0usize;
    let mut fallbacks = 0usize;
    let draw = |seed: u64| {
        let mut rng = RngStream::new(seed);
        let batch_size = 1 + rng.index(200);
        let u = sample_uniform(&pack, batch_size, &mut rng).unwrap();
        let classes = 1 + rng.index(90);
        let p = sample_class_pairs(&pack, classes, &mut rng).unwrap();
        let (gc, gs) = (1 + rng.index(8), 1 + rng.index(40));
        let g = sample_class_groups(&pack, gc, gs, &mut rng).unwrap();
        (batch_size, (classes, gc, gs), [u, p, g])
    };
    for trial in 0..10_000u64 {
        let (batch_size, (classes, gc, gs), [u, p, g]) = draw(trial);
        let u_ok = u.sample_indices.len() == batch_size
            && u.structure == BatchStructure::Uniform
            && u.sample_indices.iter().zip(&u.labels).all(|(&i, &l)| pack.label(i) == l);
        let p_ok = p.structure == BatchStructure::Pairs { classes_per_batch: classes } && batch_ok(&pack, &p, classes, 2);
        let g_ok = g.structure == BatchStructure::Groups { classes_per_batch: gc, samples_per_class: gs }
            && batch_ok(&pack, &g, gc, gs);
        fallbacks += p.resampled_classes.len() + g.resampled_classes.len();
        let same = draw(trial).2 == [u, p, g];
        if !(u_ok && p_ok && g_ok && same) {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("10000 batches per structure, {failures} violations, {fallbacks} with-replacement fallbacks exercised"),
    )
}

// ---------------------------------------------------------------- 5

fn random_record(rng: &mut RngStream) -> GntRecord {
    let (w, h) = (1 + rng.index(80) as u16, 1 + rng.index(80) as u16);
    let bitmap = (0..w as usize * h as usize).map(|_| rng.index(256) as u8).collect();
    GntRecord { tag_code: TagCode([rng.index(256) as u8, rng.index(256) as u8]), width: w, height: h, bitmap }
}

fn malformed_fixtures() -> Vec<(&'static str, Vec<u8>, u64)> {
    let good = serialize_gnt(&[GntRecord {
        tag_code: TagCode([0xB0, 0xA1]),
        width: 2,
        height: 2,
        bitmap: vec![0, 255, 255, 0],
    }])
    .unwrap();
    let with = |edit: &dyn Fn(&mut Vec<u8>)| {
        let mut b = good.clone();
        edit(&mut b);
        b
    };
    let second = |bad: Vec<u8>| [good.clone(), bad].concat();
    vec![
        ("size too small", with(&|b| b[0] = 13), 0),
        ("size too large", with(&|b| b[0] = 15), 0),
        ("zero width", with(&|b| { b[6] = 0; b[0] = 10 }), 0),
        ("zero height", with(&|b| { b[8] = 0; b[0] = 10 }), 0),
        ("truncated header", good[..7].to_vec(), 0),
        ("truncated bitmap", good[..12].to_vec(), 0),
        ("second record truncated", second(good[..5].to_vec()), 14),
        ("second record size mismatch", second(with(&|b| b[1] = 1)), 14),
        ("trailing byte", second(vec![0x0E]), 14),
    ]
}

fn parser_round_trip() -> Outcome {
    let mut rng = RngStream::new(55);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let count = 1 + rng.index(3);
        let records: Vec<GntRecord> = (0..count).map(|_| random_record(&mut rng)).collect();
        let bytes = serialize_gnt(&records).unwrap();
        let parsed = parse_gnt(&bytes).unwrap();
        if parsed != records || serialize_gnt(&parsed).unwrap() != bytes {
            mismatches += 1;
        }
    }
    let fixtures = malformed_fixtures();
    let mut bad_fixtures = Vec::new();
    for (name, bytes, offset) in &fixtures {
        match parse_gnt(bytes) {
            Err(Error::Gnt { offset: got, .. }) if got == *offset => {}
            _ => bad_fixtures.push(*name),
        }
    }
    outcome(
        mismatches == 0 && bad_fixtures.is_empty(),
        format!(
            "1000 random streams, {mismatches} mismatches; {}/{} malformed fixtures rejected at the right offset{}",
            fixtures.len() - bad_fixtures.len(),
            fixtures.len(),
            if bad_fixtures.is_empty() { String::new() } else { format!(" (failed: {bad_fixtures:?})") }
        ),
    )
}

// ---------------------------------------------------------------- 6

fn ink_extent(image: &[f64]) -> usize {
    let (mut top, mut bottom, mut left, mut right) = (usize::MAX, 0, usize::MAX, 0);
    for (i, &v) in image.iter().enumerate() {
        if v > 0.0 {
            let (r, c) = (i / IMAGE_SIDE, i % IMAGE_SIDE);
            top = top.min(r);
            bottom = bottom.max(r);
            left = left.min(c);
            right = right.max(c);
        }
    }
    (bottom - top + 1).max(right - left + 1)
}

fn preprocessing_contract() -> Outcome {
    let mut rng = RngStream::new(77);
    let mut bad = 0;
    let mut extents = BTreeMap::new();
    for _ in 0..1000 {
        let (w, h) = (1 + rng.index(300), 1 + rng.index(300));
        let mut bitmap = vec![255u8; w * h];
        let strokes = 1 + rng.index(6);
        for _ in 0..strokes {
            let (r0, c0, r1, c1) = (rng.index(h), rng.index(w), rng.index(h), rng.index(w));
            let steps = r0.abs_diff(r1).max(c0.abs_diff(c1)).max(1);
            let ink = rng.index(255) as u8;
            for s in 0..=steps {
                let r = r0 as f64 + (r1 as f64 - r0 as f64) * s as f64 / steps as f64;
                let c = c0 as f64 + (c1 as f64 - c0 as f64) * s as f64 / steps as f64;
                bitmap[r.round() as usize * w + c.round() as usize] = ink;
            }
        }
        let record = GntRecord { tag_code: TagCode([1, 1]), width: w as u16, height: h as u16, bitmap };
        let image = preprocess(&record).expect("every bitmap has ink");
        let extent = ink_extent(&image);
        *extents.entry(extent).or_insert(0) += 1;
        let ok = image.len() == IMAGE_SIDE * IMAGE_SIDE
            && image.iter().all(|v| (0.0..=1.0).contains(v))
            && (119..=121).contains(&extent);
        if !ok {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("1000 bitmaps up to 300x300, {bad} violations, extents {extents:?}"))
}

// ---------------------------------------------------------------- 7, 8 and the loss-decrease property

const KINDS: [LossKind; 3] = [LossKind::SoftmaxOnly, LossKind::SoftmaxPlusEuclidean, LossKind::SoftmaxPlusVariance];
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct RunSummary {
    train_rate: f64,
    held_rate: f64,
    variance: f64,
    distance: f64,
    history: Vec<StepRecord>,
    elapsed: Duration,
}

struct Runs {
    train: DatasetPack,
    held: DatasetPack,
    results: BTreeMap<(char, u64), RunSummary>,
}

impl Runs {
    fn new() -> Self {
        Self { train: synth_dataset(10, 40, 7).unwrap(), held: synth_dataset(10, 8, 8).unwrap(), results: BTreeMap::new() }
    }

    fn get(&mut self, kind: LossKind, seed: u64) -> &RunSummary {
        let key = (kind.letter(), seed);
        if !self.results.contains_key(&key) {
            let mut config = TrainConfig::desk(kind, 10);
            config.seed = seed;
            let start = Instant::now();
            let mut trainer = Trainer::new(config.clone(), &self.train).unwrap();
            let history: Vec<StepRecord> = (0..config.steps).map(|_| trainer.step().unwrap()).collect();
            let params = trainer.into_params();
            let elapsed = start.elapsed();
            let (_, features) = predict(&params, &self.held).unwrap();
            let summary = RunSummary {
                train_rate: evaluate(&params, &self.train).unwrap(),
                held_rate: evaluate(&params, &self.held).unwrap(),
                variance: intra_class_variance(&features, self.held.labels(), 10),
                distance: intra_class_distance(&features, self.held.labels()),
                history,
                elapsed,
            };
            println!(
                "    run {} seed {}: train {:.4} held-out {:.4} variance {:.5} distance {:.4} ({:.0}s)",
                key.0,
                seed,
                summary.train_rate,
                summary.held_rate,
                summary.variance,
                summary.distance,
                elapsed.as_secs_f64()
            );
            self.results.insert(key, summary);
        }
        &self.results[&key]
    }
}

fn convergence(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in KINDS {
        let r = runs.get(kind, SEEDS[0]);
        let ok = r.train_rate >= 0.99 && r.held_rate >= 0.90 && r.history.len() <= 500 && r.elapsed <= Duration::from_secs(600);
        pass &= ok;
        parts.push(format!(
            "{}: train {:.3} held-out {:.3} in {} steps {:.0}s",
            kind.letter(),
            r.train_rate,
            r.held_rate,
            r.history.len(),
            r.elapsed.as_secs_f64()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn mechanism(runs: &mut Runs) -> Outcome {
    let (mut c_wins, mut b_wins) = (0, 0);
    for seed in SEEDS {
        let a = (runs.get(LossKind::SoftmaxOnly, seed).variance, runs.get(LossKind::SoftmaxOnly, seed).distance);
        let b = runs.get(LossKind::SoftmaxPlusEuclidean, seed).distance;
        let c = runs.get(LossKind::SoftmaxPlusVariance, seed).variance;
        c_wins += (c < a.0) as usize;
        b_wins += (b < a.1) as usize;
    }
    outcome(
        c_wins >= 4 && b_wins >= 4,
        format!("variance C < A in {c_wins}/5 seeds; pair distance B < A in {b_wins}/5 seeds"),
    )
}

fn moving_average(history: &[StepRecord], end: usize) -> f64 {
    history[end - 50..end].iter().map(|r| r.total_loss).sum::<f64>() / 50.0
}

fn loss_decrease(runs: &mut Runs) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in KINDS {
        let wins = SEEDS
            .iter()
            .filter(|&&seed| {
                let h = &runs.get(kind, seed).history;
                moving_average(h, 300) < moving_average(h, 50)
            })
            .count();
        pass &= wins >= 4;
        parts.push(format!("{}: {wins}/5", kind.letter()));
    }
    outcome(pass, format!("50-step mean loss at 300 below that at 50 — {}", parts.join(", ")))
}

// ---------------------------------------------------------------- 9

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("p.pack");
    hccr::pack::write_pack(&synth_dataset(10, 40, 7).unwrap(), &pack).unwrap();
    let run = |tag: &str, variant: &str, extra: &[&str]| -> (Vec<u8>, Vec<u8>) {
        let ckpt = dir.path().join(format!("{tag}.ckpt"));
        let metrics = dir.path().join(format!("{tag}.jsonl"));
        let status = Command::new(env!("CARGO_BIN_EXE_hccr"))
            .args(["train", "--variant", variant, "--pack"])
            .arg(&pack)
            .args(["--steps", "20", "--seed", "5", "--arch", "desk", "--lr", "0.03", "--eval-every", "10", "--out"])
            .arg(&ckpt)
            .arg("--metrics")
            .arg(&metrics)
            .args(extra)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success());
        (read(&metrics), read(&ckpt))
    };
    fn read(p: &Path) -> Vec<u8> {
        std::fs::read(p).unwrap()
    }
    let mut identical = 0;
    let cases: [(&str, &[&str]); 3] = [
        ("a", &["--batch-size", "40"]),
        ("b", &["--classes-per-batch", "10", "--lambda", "0.03"]),
        ("c", &["--classes-per-batch", "5", "--samples-per-class", "8"]),
    ];
    for (variant, extra) in cases {
        let first = run(&format!("{variant}1"), variant, extra);
        let second = run(&format!("{variant}2"), variant, extra);
        identical += (first == second && !first.0.is_empty()) as usize;
    }
    outcome(identical == 3, format!("{identical}/3 variants produced byte-identical metrics and checkpoints"))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut runs = Runs::new();
    let mut failed = 0;
    let mut report = |n: u32, name: &str, o: Outcome| {
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    };
    if run(1) {
        report(1, "gradient suite", gradient_suite());
    }
    if run(2) {
        report(2, "loss oracles", loss_oracles());
    }
    if run(3) {
        report(3, "known values", known_values());
    }
    if run(4) {
        report(4, "sampler invariants", sampler_invariants());
    }
    if run(5) {
        report(5, "parser round trip", parser_round_trip());
    }
    if run(6) {
        report(6, "preprocessing contract", preprocessing_contract());
    }
    if run(7) {
        report(7, "convergence", convergence(&mut runs));
    }
    if run(8) {
        report(8, "similarity mechanism", mechanism(&mut runs));
        report(8, "loss decrease", loss_decrease(&mut runs));
    }
    if run(9) {
        report(9, "determinism", determinism());
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance checks passed");
        ExitCode::SUCCESS
    }
}
