use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use alignpipe::stages;
use alignpipe::{PipelineConfig, Result};
use synthmotion::Split;

/// Misalignment-robust registration pipeline over synthetic perturbations:
/// generate misaligned pairs with exact ground truth, estimate and compose
/// short-range flows over a morph chain, refine the composed flow with the
/// trained residual network, and score the results.
#[derive(Parser)]
#[command(name = "alignpipe", version, about)]
struct Cli {
    /// Path to the pipeline config (TOML). Built-in defaults apply when
    /// the default path does not exist.
    #[arg(long, default_value = "alignpipe.toml")]
    config: PathBuf,

    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override worker thread count (0 = auto).
    #[arg(long)]
    jobs: Option<usize>,

    /// Override the dataset root.
    #[arg(long)]
    data_root: Option<PathBuf>,

    /// Override the work directory.
    #[arg(long)]
    work_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(v: SplitArg) -> Split {
        match v {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the perturbed dataset with exact ground-truth flows.
    Perturb,
    /// Build morph chains and stepwise flows.
    Chain {
        /// Restrict to one pair id.
        #[arg(long)]
        pair: Option<String>,
    },
    /// Compose stepwise flows into direct flows.
    Compose {
        #[arg(long)]
        pair: Option<String>,
    },
    /// Train the residual refiner on the train/val splits.
    Train,
    /// Refine composed flows with the trained model.
    Refine {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Score alignment variants against ground truth.
    Eval {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Print aggregate tables from existing eval reports.
    Report,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = if cli.config.exists() {
        PipelineConfig::load(&cli.config)?
    } else if cli.config.as_os_str() == "alignpipe.toml" {
        PipelineConfig::default()
    } else {
        return Err(alignpipe::PipelineError::Config(format!(
            "config file {} not found",
            cli.config.display()
        )));
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if let Some(root) = &cli.data_root {
        config.dataset_root = root.clone();
    }
    if let Some(dir) = &cli.work_dir {
        config.work_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Perturb => {
            let records = stages::cmd_perturb(&config)?;
            let ok = records.iter().filter(|r| r.is_ok()).count();
            println!(
                "perturb: {ok}/{} pairs written under {}",
                records.len(),
                config.work_dir.display()
            );
        }
        Command::Chain { pair } => {
            let n = stages::cmd_chain(&config, pair.as_deref())?;
            println!("chain: {n} pairs processed");
        }
        Command::Compose { pair } => {
            let n = stages::cmd_compose(&config, pair.as_deref())?;
            println!("compose: {n} pairs processed");
        }
        Command::Train => {
            let summary = stages::cmd_train(&config)?;
            for (epoch, loss, val) in &summary.history {
                println!("epoch {epoch}: train loss {loss:.4}, val EPE {val:.3} px");
            }
            println!(
                "train: best val EPE {:.3} px at epoch {}; checkpoint at {}",
                summary.best_val_epe,
                summary.best_epoch,
                config.checkpoint_path().display()
            );
        }
        Command::Refine { split } => {
            let n = stages::cmd_refine(&config, split.into())?;
            println!("refine: {n} pairs processed");
        }
        Command::Eval { split } => {
            let report = stages::cmd_eval(&config, split.into())?;
            println!(
                "eval: {} rows over {} variants written under {}",
                report.pairs.len(),
                report.aggregates.len(),
                config.work_dir.join("reports").display()
            );
        }
        Command::Report => {
            let text = stages::cmd_report(&config)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Single machine-parsable failure line.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
