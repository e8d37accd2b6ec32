//! `biharm` — reproducible runs of the threshold-classification and dispersive
//! decay toolkit. A single TOML config fully determines a run; every output file
//! lands in the chosen directory together with a checksum manifest.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use artifacts::{sha256_hex, OutputDir};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "biharm", version, about = "fourth-order Schrödinger toolkit runner")]
struct Cli {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing; locked for the duration of the run)
    #[arg(long)]
    out: PathBuf,
    /// Dense linear-algebra thread budget (BIHARM_THREADS overrides)
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Chatty progress on stderr
    #[arg(long)]
    verbose: bool,
}

// exit codes: 2 config, 3 inconsistency, 4 accuracy/resolution, 5 environment
const EXIT_CONFIG: u8 = 2;
const EXIT_INCONSISTENT: u8 = 3;
const EXIT_ACCURACY: u8 = 4;
const EXIT_OTHER: u8 = 5;

fn classify_error(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<biharm::Error>() {
        return match e {
            biharm::Error::Domain(_) | biharm::Error::Data(_) => EXIT_CONFIG,
            biharm::Error::Inconsistency(_) => EXIT_INCONSISTENT,
            biharm::Error::Accuracy(_, _) | biharm::Error::Resolution(_) => EXIT_ACCURACY,
            biharm::Error::Backend(_) => EXIT_OTHER,
        };
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("BIHARM_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(cli.threads)
        .max(1);
    // dense kernels here are single-threaded; the budget is recorded for
    // reproducibility and honored by the BLAS if it reads the usual variable
    std::env::set_var("OPENBLAS_NUM_THREADS", threads.to_string());

    let config_text = match std::fs::read(&cli.config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config_hash = sha256_hex(&config_text);
    let cfg = match std::str::from_utf8(&config_text)
        .map_err(anyhow::Error::from)
        .and_then(|t| RunConfig::parse(t))
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cli.verbose {
        eprintln!("config {} -> {}", cli.config.display(), cli.out.display());
    }

    let mut out = match OutputDir::acquire(&cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_OTHER);
        }
    };

    match commands::dispatch(&cfg, &mut out, &config_hash, cli.verbose) {
        Ok(()) => match out.finish(&config_hash, threads) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error writing manifest: {e}");
                ExitCode::from(EXIT_OTHER)
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify_error(&e))
        }
    }
}
