//! `scet`: train, evaluate, run and audit SCET super-resolution models.

mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "scet", version, about = "Lightweight single-image super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Plain `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=4))]
    scale: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of SCPA blocks.
    #[arg(long)]
    d: Option<usize>,
    /// Backbone feature width.
    #[arg(long)]
    w: Option<usize>,
    /// Drop the MDTA/GDFN stage.
    #[arg(long)]
    no_transformer: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train from scratch on a directory of HR PNGs.
    Train {
        #[command(flatten)]
        common: Common,
        /// HR training images (also `data = DIR` in the config file).
        #[arg(long)]
        data: Option<PathBuf>,
        /// `full` or `desk-tiny`.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Degrade HR images, super-resolve them and write Y-channel PSNR/SSIM.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        hr: PathBuf,
        /// Score the HR image against itself.
        #[arg(long, conflicts_with = "bicubic")]
        bypass: bool,
        /// Score bicubic upscaling instead of the network.
        #[arg(long)]
        bicubic: bool,
    },
    /// Super-resolve one LR PNG.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Print parameter and Multi-Adds counts per submodule.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Count an existing checkpoint instead of a configured model.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// HR output extent as WIDTHxHEIGHT.
        #[arg(long, default_value = "1280x720")]
        hr_size: String,
    },
    /// Write bicubically degraded LR copies of a directory of HR PNGs.
    Degrade {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hr: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SCET_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SCET_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Train { common, data, preset, iters } => commands::train(&common, data, preset, iters),
        Command::Eval { common, checkpoint, hr, bypass, bicubic } => {
            commands::eval(&common, checkpoint.as_deref(), &hr, bypass, bicubic)
        }
        Command::Infer { common, checkpoint, input } => commands::infer(&common, &checkpoint, &input),
        Command::Audit { common, checkpoint, preset, hr_size } => {
            commands::audit(&common, checkpoint.as_deref(), preset, &hr_size)
        }
        Command::Degrade { common, hr } => commands::degrade(&common, &hr),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
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
