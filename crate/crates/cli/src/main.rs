use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rlx::harness::{emit_plot, parse_config, run_experiment, run_matrix, ExperimentConfig, Question};

#[derive(Parser)]
#[command(name = "rlx", version, about = "Intrinsic-reward exploration experiments on DoorKey gridworlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config and write CSV/JSONL logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the candidates of one ablation question.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        /// One of q1, q2, q3, q4, q6, q7.
        #[arg(long)]
        question: String,
    },
    /// Draw learning curves for all runs below a directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "success_rate")]
        metric: String,
    },
    /// Parse a config and print its canonical form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            for r in run_experiment(&cfg)? {
                let last = r.log.last();
                println!(
                    "seed {}: success {:.3}, return {:.3} -> {}",
                    r.seed,
                    last.map_or(0.0, |l| l.success_rate),
                    last.map_or(0.0, |l| l.episode_return_mean),
                    r.csv_path.display()
                );
            }
        }
        Command::Matrix { config, question } => {
            let cfg = load(&config)?;
            let q: Question = question.parse()?;
            let (path, rows) = run_matrix(&cfg, q)?;
            for r in &rows {
                println!(
                    "{:<14} {:<12} success {:.3} ± {:.3}",
                    r.bonus, r.candidate, r.success_mean, r.success_std
                );
            }
            println!("summary: {}", path.display());
        }
        Command::Plot { input, out, metric } => {
            emit_plot(&input, &out, &metric)?;
            println!("wrote {}", out.display());
        }
        Command::Validate { config } => {
            print!("{}", load(&config)?.to_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
