use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slr_bench::commands::{cmd_crossval, cmd_eval, cmd_synth, cmd_train};
use slr_bench::{CliError, ExperimentConfig, Result};
use slr_core::models::ModelKind;

#[derive(Parser)]
#[command(name = "slr-bench", version, about = "Isolated sign recognition benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic landmark dataset.
    Synth {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        signers: usize,
        #[arg(long = "per-class")]
        per_class: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train and evaluate one (model, fold, seed) cell.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        fold: usize,
        /// Run seed; defaults to train.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "data-root")]
        data_root: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Check gradients and parameters for non-finite values every step.
        #[arg(long)]
        checked: bool,
    },
    /// Run the signer-independent cross-validation grid and aggregate it.
    Crossval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "convlstm,transformer")]
        models: Vec<ModelKind>,
        /// Cells trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long = "data-root")]
        data_root: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        checked: bool,
    },
    /// Score a checkpoint on the samples of a manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// CSV file the result row is appended to (default: eval.csv next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Path, data_root: Option<PathBuf>, output: Option<PathBuf>, checked: bool) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(root) = data_root {
        cfg.data.root = root;
    }
    if let Some(out) = output {
        cfg.run.output = out;
    }
    cfg.run.checked |= checked;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            classes,
            signers,
            per_class,
            seed,
            out,
            force,
        } => {
            let m = cmd_synth(classes, signers, per_class, seed, &out, force)?;
            println!(
                "wrote {} samples ({} classes, {} signers) to {}",
                m.samples.len(),
                m.classes,
                m.signers().len(),
                out.display()
            );
        }
        Command::Train {
            config,
            model,
            fold,
            seed,
            data_root,
            output,
            checked,
        } => {
            let cfg = load(&config, data_root, output, checked)?;
            let seed = seed.unwrap_or(cfg.train.seed);
            let r = cmd_train(&cfg, model, fold, seed)?;
            println!(
                "{model} fold {fold} seed {seed}: top1 {:.4} top5 {:.4} (best epoch {}, {} epochs)",
                r.result.top1, r.result.top5, r.best_epoch, r.epochs_run
            );
        }
        Command::Crossval {
            config,
            models,
            jobs,
            data_root,
            output,
            checked,
        } => {
            let cfg = load(&config, data_root, output, checked)?;
            if models.is_empty() {
                return Err(CliError::Config("--models must name at least one model".into()));
            }
            let g = cmd_crossval(&cfg, &models, jobs)?;
            println!("{} cells computed, {} resumed", g.computed, g.resumed);
            print!("{}", slr_core::evaluation::markdown_table(&g.reports));
        }
        Command::Eval {
            checkpoint,
            manifest,
            k,
            out,
        } => {
            let r = cmd_eval(&checkpoint, &manifest, k, out.as_deref())?;
            println!("top1 {:.4} top{} {:.4} on {} samples", r.top1, r.k, r.topk, r.samples);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
