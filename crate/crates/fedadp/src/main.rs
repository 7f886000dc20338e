use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedadp::config::ExperimentConfig;
use fedadp::experiment::run_experiment;
use fedadp::heatmap::{read_fi_csv, square_side, write_pgm};
use fedadp::suite::run_suite;
use fedadp::{AppError, Result};

#[derive(Parser)]
#[command(name = "fedadp", about = "Federated learning with adaptive differential privacy")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root (default: $FEDADP_OUT_DIR, then ./out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker pool size; affects speed only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a TOML config file.
    Run { config: PathBuf },
    /// Run named experiment presets.
    Suite { presets: Vec<String> },
    /// Render a feature-importance CSV as a PGM heatmap.
    Heatmap {
        csv: PathBuf,
        out: PathBuf,
        /// Image shape as ROWSxCOLS; required when the score count is not a
        /// perfect square.
        #[arg(long)]
        shape: Option<String>,
    },
}

fn out_root(cli: &Cli) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| std::env::var_os("FEDADP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn parse_shape(text: &str) -> Result<(usize, usize)> {
    let err = || AppError::Usage(format!("shape must look like 28x28, got \"{text}\""));
    let (r, c) = text.split_once('x').ok_or_else(err)?;
    let rows: usize = r.parse().map_err(|_| err())?;
    let cols: usize = c.parse().map_err(|_| err())?;
    if rows == 0 || cols == 0 {
        return Err(err());
    }
    Ok((rows, cols))
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(AppError::Usage(String::from("--threads must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| AppError::Runtime(anyhow::anyhow!("thread pool: {e}")))?;
    }
    match &cli.cmd {
        Cmd::Run { config } => {
            let mut cfg = ExperimentConfig::parse_file(config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out_dir = out_root(cli).join(&cfg.name);
            let out = run_experiment(&cfg, &out_dir)?;
            println!(
                "{}: final accuracy {:.4} ({} rounds) -> {}",
                cfg.name,
                out.final_accuracy,
                out.metrics.len(),
                out.metrics_path.display()
            );
            Ok(())
        }
        Cmd::Suite { presets } => {
            if presets.is_empty() {
                return Err(AppError::Usage(format!(
                    "no presets given; available: {}",
                    fedadp::suite::PRESETS.join(", ")
                )));
            }
            run_suite(presets, &out_root(cli), cli.seed)
        }
        Cmd::Heatmap { csv, out, shape } => {
            let scores = read_fi_csv(csv)?;
            let (rows, cols) = match shape {
                Some(text) => parse_shape(text)?,
                None => {
                    let side = square_side(scores.len()).ok_or_else(|| {
                        AppError::Usage(format!(
                            "{} scores are not a perfect square; pass --shape ROWSxCOLS",
                            scores.len()
                        ))
                    })?;
                    (side, side)
                }
            };
            write_pgm(out, &scores, rows, cols)?;
            println!("wrote {rows}x{cols} heatmap to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedadp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
