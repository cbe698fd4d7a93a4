use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fmd_cli::{cmd_bench, cmd_decompose, cmd_eval, cmd_gen, cmd_train, RunConfig, Sweep};

#[derive(Parser)]
#[command(name = "fmd", version, about = "Few-mode fiber beam synthesis and mode decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset of synthetic beam images and labels
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a network on freshly synthesized batches
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decompose a PGM frame or a directory of frames into a CSV
    Decompose {
        #[arg(long)]
        config: PathBuf,
        checkpoint: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        write_recon: bool,
    },
    /// Evaluate checkpoints over a mode-count, noise, or resolution sweep
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time decomposition of synthetic frames one by one
    Bench {
        #[arg(long)]
        config: PathBuf,
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> fmd_cli::Result<RunConfig> {
    Ok(RunConfig::load(path)?.with_seed(seed))
}

fn run(cli: Cli) -> fmd_cli::Result<()> {
    match cli.command {
        Command::Gen { config, count, out, seed } => {
            let data = cmd_gen(&load(&config, seed)?, count, &out)?;
            println!("wrote {} samples to {}", data.samples.len(), out.display());
        }
        Command::Train { config, out, seed } => {
            let cfg = load(&config, seed)?;
            cmd_train(&cfg, &out, |s| {
                eprintln!(
                    "epoch {:>3}  loss {:.6}  holdout correlation {:.5}",
                    s.epoch, s.loss, s.holdout_correlation
                )
            })?;
            println!("wrote {}", out.display());
        }
        Command::Decompose {
            config,
            checkpoint,
            input,
            out,
            write_recon,
        } => {
            let rows = cmd_decompose(&load(&config, None)?, &checkpoint, &input, &out, write_recon)?;
            let mean = rows.iter().map(|r| r.correlation).sum::<f64>() / rows.len() as f64;
            println!("{} frames, mean correlation {mean:.5}", rows.len());
        }
        Command::Eval {
            config,
            checkpoints,
            sweep,
            out,
            count,
            seed,
        } => {
            let sweep: Sweep = sweep.parse()?;
            let rows = cmd_eval(&load(&config, seed)?, &checkpoints, sweep, count, &out)?;
            for r in rows {
                println!(
                    "{} {}: correlation {:.5}, weight error {:.3}%, phase error {:.3}%",
                    sweep.name(),
                    r.value,
                    r.mean_correlation,
                    r.errors.mean_weight_error,
                    r.errors.mean_phase_error
                );
            }
        }
        Command::Bench {
            config,
            checkpoint,
            count,
            out,
            seed,
        } => {
            let report = cmd_bench(&load(&config, seed)?, &checkpoint, count, out.as_deref())?;
            print!("{}", report.csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fmd: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
