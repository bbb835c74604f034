//! Batch driver for the spherical field pipeline.
//!
//! Every subcommand is driven by a JSON config; command-line flags only
//! override paths and the worker thread count (`--threads`, or the
//! `HEALPIPE_THREADS` environment variable). Outputs are deterministic
//! given the config: reruns produce byte-identical artifacts regardless
//! of thread count.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
//! contract violation (e.g. a NaN produced mid-pipeline).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use healpipe_core::error::Error;
use serde::de::DeserializeOwned;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "healpipe",
    about = "lat/lon <-> HEALPix projection, spherical harmonic transforms, \
             spectra, metrics and compression bookkeeping"
)]
struct Cli {
    /// Worker threads (overrides HEALPIPE_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test field: constant, single harmonic, or seeded
    /// random band-limited.
    SynthField {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a lat/lon field onto HEALPix (optionally padded tiles).
    Project {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproject a HEALPix field (or padded stack) to lat/lon via the
    /// spherical harmonic transform.
    Reproject {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Angular power spectrum of a field, as CSV.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruction metrics between a truth and a reconstruction field.
    Metrics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        recon: Option<PathBuf>,
    },
    /// Quantize a tile stack against a codebook; write tiles, side info
    /// and a rate report.
    Compress {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Reconstruct a tile stack from compress artifacts.
    Decompress {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: synth -> padded projection -> optional codec -> blend ->
    /// analyze -> spectrum -> synthesize -> metrics.
    Roundtrip {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load_config<T: DeserializeOwned>(path: &PathBuf) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericContract(_) => 4,
        Error::Domain(_) | Error::Resource(_) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<(), (i32, String)> {
    let config_err = |msg: String| (2, msg);
    let core_err = |e: Error| (exit_code(&e), e.to_string());

    match cli.command {
        Command::SynthField { config, out } => {
            let mut cfg: config::SynthFieldConfig = load_config(&config).map_err(config_err)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            commands::cmd_synth_field(&cfg).map_err(core_err)
        }
        Command::Project { config, input, out } => {
            let mut cfg: config::ProjectConfig = load_config(&config).map_err(config_err)?;
            if let Some(input) = input {
                cfg.input = input;
            }
            if let Some(out) = out {
                cfg.out = out;
            }
            commands::cmd_project(&cfg).map_err(core_err)
        }
        Command::Reproject { config, input, out } => {
            let mut cfg: config::ReprojectConfig = load_config(&config).map_err(config_err)?;
            if let Some(input) = input {
                cfg.input = input;
            }
            if let Some(out) = out {
                cfg.out = out;
            }
            commands::cmd_reproject(&cfg).map_err(core_err)
        }
        Command::Spectrum { config, input, out } => {
            let mut cfg: config::SpectrumConfig = load_config(&config).map_err(config_err)?;
            if let Some(input) = input {
                cfg.input = input;
            }
            if let Some(out) = out {
                cfg.out = out;
            }
            commands::cmd_spectrum(&cfg).map_err(core_err)
        }
        Command::Metrics {
            config,
            truth,
            recon,
        } => {
            let mut cfg: config::MetricsConfig = load_config(&config).map_err(config_err)?;
            if let Some(truth) = truth {
                cfg.truth = truth;
            }
            if let Some(recon) = recon {
                cfg.recon = recon;
            }
            commands::cmd_metrics(&cfg).map_err(core_err)
        }
        Command::Compress {
            config,
            input,
            out_dir,
        } => {
            let mut cfg: config::CompressConfig = load_config(&config).map_err(config_err)?;
            if let Some(input) = input {
                cfg.input = input;
            }
            if let Some(out_dir) = out_dir {
                cfg.out_dir = out_dir;
            }
            commands::cmd_compress(&cfg).map_err(core_err)
        }
        Command::Decompress { config, dir, out } => {
            let mut cfg: config::DecompressConfig = load_config(&config).map_err(config_err)?;
            if let Some(dir) = dir {
                cfg.dir = dir;
            }
            if let Some(out) = out {
                cfg.out = out;
            }
            commands::cmd_decompress(&cfg).map_err(core_err)
        }
        Command::Roundtrip { config, out_dir } => {
            let mut cfg: config::RoundtripConfig = load_config(&config).map_err(config_err)?;
            if let Some(out_dir) = out_dir {
                cfg.out_dir = out_dir;
            }
            commands::cmd_roundtrip(&cfg).map_err(core_err)
        }
    }
}

fn main() {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("HEALPIPE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("healpipe: cannot configure {n} threads: {e}");
            std::process::exit(2);
        }
    }

    if let Err((code, msg)) = run(cli) {
        eprintln!("healpipe: {msg}");
        std::process::exit(code);
    }
}
