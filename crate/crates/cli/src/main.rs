use std::path::PathBuf;
use std::process::ExitCode;

use agbrecon::commands::{self, Split};
use agbrecon::io::{parse_overrides, ExperimentConfig};
use agbrecon::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "agbrecon",
    version,
    about = "Sparse multi-coil MRI reconstruction with adaptive gradient balancing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides one configuration key; repeatable, wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(self.config.as_deref(), &parse_overrides(&self.set)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset of phantoms, coil maps and undersampled k-space.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write metrics, snapshots and checkpoints.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Validation dataset; defaults to holding out the last `val_count` training samples.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Training checkpoint to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score zero-filled images and a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Score the ground truth against itself in place of the model.
        #[arg(long)]
        identity: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write ground truth, zero-filled and model reconstructions side by side as a PGM.
    ExportPanel {
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { config, split, out } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
            };
            let report = commands::gen_data(&config.load()?, split, &out)?;
            println!("{}", json(&report));
        }
        Command::Train {
            config,
            data,
            val,
            out,
            resume,
        } => {
            let report = commands::train(&config.load()?, &data, val.as_deref(), &out, resume.as_deref())?;
            println!("{}", json(&report));
        }
        Command::Eval {
            checkpoint,
            data,
            identity,
            out,
        } => {
            let text = json(&commands::eval(&checkpoint, &data, identity)?);
            if let Some(path) = out {
                std::fs::write(path, format!("{text}\n"))?;
            }
            println!("{text}");
        }
        Command::ExportPanel {
            checkpoints,
            data,
            index,
            out,
        } => {
            let sidecar = commands::export_panel(&checkpoints, &data, index, &out)?;
            println!("{}", json(&sidecar));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
