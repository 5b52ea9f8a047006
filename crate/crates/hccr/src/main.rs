use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hccr::checkpoint::load_checkpoint;
use hccr::pack::{read_pack, write_pack};
use hccr::run::{import_gnt, train_to_files};
use hccr::{Error, Result};
use hccr_core::dataset::{dataset_stats, synth_dataset};
use hccr_core::gradcheck::suite::{model_suite, op_suite, SuiteEntry};
use hccr_core::losses::{LossKind, LossVariant};
use hccr_core::model::{param_count, ModelConfig};
use hccr_core::sampler::SamplerConfig;
use hccr_core::train::{evaluate, full_sampler, FeatureSource, TrainConfig};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "hccr", version, about = "Handwritten character recognition with similarity-ranking losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    A,
    B,
    C,
}

impl From<Variant> for LossKind {
    fn from(v: Variant) -> Self {
        match v {
            Variant::A => LossKind::SoftmaxOnly,
            Variant::B => LossKind::SoftmaxPlusEuclidean,
            Variant::C => LossKind::SoftmaxPlusVariance,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    /// Conv 32-64-128-256-256-512, FC 1024 x 2
    Full,
    /// Same layers, narrow widths for CPU runs on small packs
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Penultimate,
    Logits,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and preprocess GNT files into a record pack
    ImportGnt {
        /// Input .gnt files followed by the output pack path
        #[arg(required = true, num_args = 2..)]
        paths: Vec<PathBuf>,
    },
    /// Write a deterministic synthetic glyph pack
    Synth {
        out: PathBuf,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print class and sample counts of a pack
    Stats { pack: PathBuf },
    /// Train one model variant and write a checkpoint and metrics file
    Train {
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long)]
        pack: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = hccr_core::train::DEFAULT_LEARNING_RATE)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint path
        #[arg(long)]
        out: PathBuf,
        /// Metrics path (default: checkpoint path with `.metrics.jsonl`)
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Arch::Full)]
        arch: Arch,
        /// Weight of the similarity term
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Uniform batch size (variant a)
        #[arg(long)]
        batch_size: Option<usize>,
        /// Distinct classes per batch (variants b and c)
        #[arg(long)]
        classes_per_batch: Option<usize>,
        /// Samples per class (variant c)
        #[arg(long)]
        samples_per_class: Option<usize>,
        /// Evaluate every N steps (0: never)
        #[arg(long, default_value_t = 0)]
        eval_every: usize,
        /// Pack to evaluate on (default: the training pack)
        #[arg(long)]
        eval_pack: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Features::Penultimate)]
        features: Features,
    },
    /// Recognition rate of a checkpoint on a pack
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        pack: PathBuf,
    },
    /// Finite-difference gradient checks of every op and a tiny network
    Gradcheck {
        /// 100 trials per case instead of 10
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn sampler_for(
    kind: LossKind,
    batch_size: Option<usize>,
    classes_per_batch: Option<usize>,
    samples_per_class: Option<usize>,
) -> Result<SamplerConfig> {
    let base = full_sampler(kind);
    let sampler = match base {
        SamplerConfig::Uniform { batch_size: b } => {
            if classes_per_batch.is_some() || samples_per_class.is_some() {
                return Err(Error::Usage("variant a takes --batch-size, not class counts".into()));
            }
            SamplerConfig::Uniform { batch_size: batch_size.unwrap_or(b) }
        }
        SamplerConfig::Pairs { classes_per_batch: c } => {
            if batch_size.is_some() || samples_per_class.is_some() {
                return Err(Error::Usage("variant b takes --classes-per-batch only".into()));
            }
            SamplerConfig::Pairs { classes_per_batch: classes_per_batch.unwrap_or(c) }
        }
        SamplerConfig::Groups { classes_per_batch: c, samples_per_class: s } => {
            if batch_size.is_some() {
                return Err(Error::Usage("variant c takes --classes-per-batch and --samples-per-class".into()));
            }
            SamplerConfig::Groups {
                classes_per_batch: classes_per_batch.unwrap_or(c),
                samples_per_class: samples_per_class.unwrap_or(s),
            }
        }
    };
    Ok(sampler)
}

fn print_suite(entries: &[SuiteEntry]) -> bool {
    let mut ok = true;
    for e in entries {
        let pass = e.report.max_rel_error <= GRADCHECK_TOLERANCE;
        ok &= pass;
        println!(
            "{:<24} trials {:>4}  max rel {:.3e}  resolved {:.3e}  checked {:>7}  skipped {:>5}  unresolved {:>5}  {}",
            e.name,
            e.trials,
            e.report.max_rel_error,
            e.report.max_rel_error_resolved,
            e.report.checked,
            e.report.skipped,
            e.report.unresolved,
            if pass { "ok" } else { "FAIL" }
        );
    }
    ok
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ImportGnt { mut paths } => {
            let out = paths.pop().expect("clap enforces two paths");
            let (pack, skipped) = import_gnt(&paths)?;
            write_pack(&pack, &out)?;
            println!(
                "wrote {}: {} classes, {} samples ({} blank records skipped)",
                out.display(),
                pack.num_classes(),
                pack.len(),
                skipped
            );
        }
        Command::Synth { out, classes, per_class, seed } => {
            let pack = synth_dataset(classes, per_class, seed)?;
            write_pack(&pack, &out)?;
            println!("wrote {}: {} classes, {} samples", out.display(), pack.num_classes(), pack.len());
        }
        Command::Stats { pack } => {
            let s = dataset_stats(&read_pack(&pack)?);
            println!("classes {}", s.classes);
            println!("samples {}", s.total);
            println!("per class min {} mean {:.1} max {}", s.min_per_class, s.mean_per_class, s.max_per_class);
        }
        Command::Train {
            variant,
            pack,
            steps,
            lr,
            seed,
            out,
            metrics,
            arch,
            lambda,
            batch_size,
            classes_per_batch,
            samples_per_class,
            eval_every,
            eval_pack,
            features,
        } => {
            let kind = LossKind::from(variant);
            let data = read_pack(&pack)?;
            let model = match arch {
                Arch::Full => ModelConfig::full(data.num_classes()),
                Arch::Desk => ModelConfig::desk(data.num_classes()),
            };
            let config = TrainConfig {
                variant: LossVariant::new(kind, lambda)?,
                sampler: sampler_for(kind, batch_size, classes_per_batch, samples_per_class)?,
                model,
                learning_rate: lr,
                steps,
                seed,
                eval_every,
                feature_source: match features {
                    Features::Penultimate => FeatureSource::Penultimate,
                    Features::Logits => FeatureSource::Logits,
                },
            };
            config.validate(&data)?;
            let eval_data = eval_pack.as_deref().map(read_pack).transpose()?;
            let metrics = metrics.unwrap_or_else(|| out.with_extension("metrics.jsonl"));
            log::info!("{} parameters", param_count(&config.model)?);
            let result = train_to_files(&config, &data, eval_data.as_ref(), &metrics, &out)?;
            if let Some(last) = result.history.last() {
                println!("final loss {:.6} (ce {:.6}, sim {:.6})", last.total_loss, last.ce_loss, last.sim_loss);
            }
            if let Some((step, rate)) = result.evals.last() {
                println!("recognition rate {rate:.4} at step {step}");
            }
            println!("wrote {} and {}", out.display(), metrics.display());
        }
        Command::Eval { checkpoint, pack } => {
            let params = load_checkpoint(&checkpoint)?;
            let data = read_pack(&pack)?;
            println!("recognition rate {:.6}", evaluate(&params, &data)?);
        }
        Command::Gradcheck { full, seed } => {
            let trials = if full { 100 } else { 10 };
            let ops = print_suite(&op_suite(trials, seed)?);
            let model = print_suite(&model_suite(trials, seed)?);
            if !(ops && model) {
                return Err(Error::Usage(format!("gradient check above {GRADCHECK_TOLERANCE:e} relative error")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
