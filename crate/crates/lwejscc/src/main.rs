use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use lwejscc::commands;
use lwejscc::config::Config;

#[derive(Parser)]
#[command(name = "lwejscc", version, about = "LWE-encrypted joint source-channel image transmission simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair from the [lwe] and [seeds] sections of a file.
    Keygen {
        #[arg(long)]
        params: PathBuf,
        /// Public and secret key paths.
        #[arg(long, num_args = 2, value_names = ["PUB", "SEC"])]
        out: Vec<PathBuf>,
    },
    /// Send images through the link at every configured SNR.
    Transmit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 2, value_names = ["PUB", "SEC"])]
        keys: Option<Vec<PathBuf>>,
        /// An image file (PGM/PPM) or `synthetic`.
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: PathBuf,
        /// Directory for reconstructed images.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// SNR sweep over the configured dataset.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 2, value_names = ["PUB", "SEC"])]
        keys: Option<Vec<PathBuf>>,
        /// Overrides [output].sweep_csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// IND-CPA game; fails if the plaintext-oracle control goes undetected.
    Indcpa {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chosen-plaintext attack; fails if the reused-error control goes
    /// undetected.
    Attack {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a codec through the link and save its parameters.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV; overrides [output].train_csv.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn key_pair(keys: &Option<Vec<PathBuf>>) -> Option<(&std::path::Path, &std::path::Path)> {
    keys.as_ref().map(|k| (k[0].as_path(), k[1].as_path()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Keygen { params, out } => {
            println!("{}", commands::keygen(&params, &out[0], &out[1])?);
        }
        Command::Transmit {
            config,
            keys,
            input,
            out,
            save,
        } => {
            let cfg = Config::load(&config)?;
            println!(
                "{}",
                commands::transmit(&cfg, key_pair(&keys), &input, &out, save.as_deref())?
            );
        }
        Command::Sweep { config, keys, out } => {
            let cfg = Config::load(&config)?;
            println!("{}", commands::sweep(&cfg, key_pair(&keys), out.as_deref())?.1);
        }
        Command::Indcpa { config, out } => {
            let outcome = commands::indcpa(&Config::load(&config)?, out.as_deref())?;
            println!("{}", outcome.summary);
            return Ok(outcome.sabotage_detected);
        }
        Command::Attack { config, out } => {
            let outcome = commands::attack(&Config::load(&config)?, out.as_deref())?;
            println!("{}", outcome.summary);
            return Ok(outcome.sabotage_detected);
        }
        Command::Train { config, out, log } => {
            let cfg = Config::load(&config)?;
            println!("{}", commands::train(&cfg, &out, log.as_deref())?.2);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
