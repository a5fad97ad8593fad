use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distill::harness::{self, ALL_BASELINES};
use distill::{ExperimentConfig, HarnessError, Overrides};

/// Learn a few synthetic training images plus per-step learning rates that
/// train a network in a handful of gradient steps.
#[derive(Parser)]
#[command(name = "distill", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Training images (IDX); test files default to the t10k siblings.
    #[arg(long, global = true)]
    mnist_images: Option<PathBuf>,
    #[arg(long, global = true)]
    mnist_labels: Option<PathBuf>,
    /// Pretrained pool file (DDPV).
    #[arg(long, global = true)]
    pool: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Distill data, then evaluate on held-out initializations.
    Distill,
    /// Evaluate a saved distilled file.
    Eval {
        #[arg(long)]
        distilled: PathBuf,
    },
    /// Grid-evaluate real-image baselines.
    Baseline {
        /// random-real, optimized-real, kmeans, average-real or all.
        #[arg(long, default_value = "all")]
        kind: String,
        /// Distilled file whose mean learned rate joins the grid.
        #[arg(long)]
        distilled: Option<PathBuf>,
    },
    /// Lower-bound table for the linear regression case, as CSV on stdout.
    LinearCheck,
    /// Distill poisoning data for a pretrained pool (one step).
    Poison,
    /// Train a pool of models for pretrained-pool inits.
    PretrainPool,
    /// Write every distilled image as PGM.
    ExportImages {
        #[arg(long)]
        distilled: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let g = cli.global;
    let base = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        seed: g.seed,
        out: g.out.clone(),
        mnist_images: g.mnist_images.clone(),
        mnist_labels: g.mnist_labels.clone(),
        // pretrain-pool writes the pool rather than reading it
        pool: match cli.command {
            Command::PretrainPool => None,
            _ => g.pool.clone(),
        },
    };
    let config = base.resolve(&overrides)?;
    match cli.command {
        Command::Distill => {
            let outcome = harness::run_distill(&config)?;
            eprintln!("{}", outcome.report.banner());
            println!(
                "mean_accuracy {:.4} std {:.4} -> {}",
                outcome.report.mean,
                outcome.report.std,
                outcome.dir.display()
            );
        }
        Command::Eval { distilled } => {
            let report = harness::run_eval(&distilled, &config)?;
            eprintln!("{}", report.banner());
            print!("{}", report.to_csv()?);
        }
        Command::Baseline { kind, distilled } => {
            let kinds = if kind == "all" {
                ALL_BASELINES.to_vec()
            } else {
                vec![harness::parse_baseline_kind(&kind)?]
            };
            let results = harness::run_baselines(&config, &kinds, distilled.as_deref())?;
            print!("{}", harness::baseline_csv(&config.run_id, &results)?);
        }
        Command::LinearCheck => {
            let (_, csv) = harness::linear_check(&config)?;
            print!("{csv}");
        }
        Command::Poison => {
            let outcome = harness::run_poison(&config)?;
            eprintln!("{}", outcome.report.banner());
            println!("{}", outcome.report.summary_json());
        }
        Command::PretrainPool => {
            let pool = harness::pretrain_pool(&config, g.pool.as_deref())?;
            println!("trained {} models", pool.len());
        }
        Command::ExportImages { distilled } => {
            let written = harness::export_images(&distilled, &config.out)?;
            println!("wrote {} images to {}", written.len(), config.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
