//! Whole-run drivers shared by the CLI and the tests.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use hccr_core::dataset::{preprocess, DatasetPack, TagCode};
use hccr_core::model::ModelParams;
use hccr_core::train::{evaluate, StepRecord, TrainConfig, Trainer};

use crate::checkpoint::save_checkpoint;
use crate::error::{Error, IoContext, Result};
use crate::gnt::GntReader;
use crate::metrics::MetricsLine;

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub params: ModelParams,
    pub history: Vec<StepRecord>,
    /// `(step, recognition rate)` for every evaluation.
    pub evals: Vec<(usize, f64)>,
}

/// Trains for `config.steps`, streaming a metrics line per step to `metrics`.
///
/// With `eval_every > 0` the model is evaluated on `eval_pack` (or the
/// training pack) every `eval_every` steps and after the last step.
pub fn train_with_metrics<W: Write>(
    config: &TrainConfig,
    pack: &DatasetPack,
    eval_pack: Option<&DatasetPack>,
    metrics: &mut W,
) -> Result<RunOutput> {
    let io_err = |e: std::io::Error| Error::Io { path: "metrics".into(), source: e };
    let mut trainer = Trainer::new(config.clone(), pack)?;
    let target = eval_pack.unwrap_or(pack);
    let started = Instant::now();
    let mut history = Vec::with_capacity(config.steps);
    let mut evals = Vec::new();
    for _ in 0..config.steps {
        let record = trainer.step()?;
        MetricsLine::step(&record).write_to(metrics).map_err(io_err)?;
        let step = record.step;
        history.push(record);
        let last = step == config.steps;
        if config.eval_every > 0 && (step % config.eval_every == 0 || last) {
            let rate = evaluate(trainer.params(), target)?;
            MetricsLine::eval(step, rate).write_to(metrics).map_err(io_err)?;
            log::info!(
                "step {step}: loss {:.4}, recognition rate {:.4} ({:.1}s)",
                history.last().map_or(0.0, |r: &StepRecord| r.total_loss),
                rate,
                started.elapsed().as_secs_f64()
            );
            evals.push((step, rate));
        }
    }
    log::info!("{} steps in {:.1}s", config.steps, started.elapsed().as_secs_f64());
    Ok(RunOutput { params: trainer.into_params(), history, evals })
}

/// Runs [`train_with_metrics`] writing the metrics file and final checkpoint.
pub fn train_to_files(
    config: &TrainConfig,
    pack: &DatasetPack,
    eval_pack: Option<&DatasetPack>,
    metrics_path: &Path,
    checkpoint_path: &Path,
) -> Result<RunOutput> {
    let mut metrics = BufWriter::new(File::create(metrics_path).at(metrics_path)?);
    let out = train_with_metrics(config, pack, eval_pack, &mut metrics)?;
    metrics.flush().at(metrics_path)?;
    save_checkpoint(&out.params, checkpoint_path)?;
    Ok(out)
}

/// Parses and preprocesses GNT files into one pack.
///
/// Classes are numbered by first appearance of their tag code across the
/// files in order. Blank images are skipped with a warning; the number
/// skipped is returned.
pub fn import_gnt(paths: &[impl AsRef<Path>]) -> Result<(DatasetPack, usize)> {
    let mut pack = DatasetPack::new(Vec::new());
    let mut classes: HashMap<TagCode, usize> = HashMap::new();
    let mut skipped = 0;
    for path in paths {
        let path = path.as_ref();
        let file = File::open(path).at(path)?;
        let mut reader = GntReader::new(BufReader::new(file));
        let mut index = 0usize;
        loop {
            let offset = reader.offset();
            let Some(record) = reader.next() else { break };
            let record = record.map_err(|e| match e {
                Error::Gnt { offset, message } => {
                    Error::Gnt { offset, message: format!("{}: {message}", path.display()) }
                }
                other => other,
            })?;
            match preprocess(&record) {
                Ok(image) => {
                    let label = *classes.entry(record.tag_code).or_insert_with(|| pack.class_for_tag(record.tag_code));
                    pack.push(label, &image)?;
                }
                Err(hccr_core::Error::Degenerate(msg)) => {
                    log::warn!("{}: skipping record {index} at byte {offset}: {msg}", path.display());
                    skipped += 1;
                }
                Err(e) => return Err(e.into()),
            }
            index += 1;
        }
    }
    Ok((pack, skipped))
}
