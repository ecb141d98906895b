use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conetrack_cli::commands::{cmd_evaluate, cmd_export_map, cmd_run, cmd_simulate, truth_path};
use conetrack_cli::formats::to_json;
use conetrack_cli::{CliError, PipelineConfig};

#[derive(Parser)]
#[command(name = "conetrack", version, about = "Cone perception and track mapping on simulated LIDAR data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides every seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the pipeline over a dataset.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// Defaults to the configuration stored with the dataset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a map against ground truth.
    Evaluate {
        #[arg(long)]
        map: PathBuf,
        /// Truth file; defaults to the one in `--dataset`.
        #[arg(long, required_unless_present = "dataset")]
        truth: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the metrics to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write landmarks and the midline as CSV.
    ExportMap {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<PipelineConfig, CliError> {
    let cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = load_config(config.as_ref(), seed)?;
            let manifest = cmd_simulate(&cfg, &out)?;
            Ok(format!("wrote {} scans to {} (config {})", manifest.scans.len(), out.display(), manifest.config_hash))
        }
        Command::Run { dataset, config, out, seed } => {
            let cfg = match (&config, seed) {
                (None, None) => None,
                _ => Some(load_config(config.as_ref(), seed)?),
            };
            let report = cmd_run(&dataset, cfg.as_ref(), &out)?;
            Ok(to_json(&report))
        }
        Command::Evaluate { map, truth, dataset, config, out } => {
            let cfg = load_config(config.as_ref(), None)?;
            let truth = truth.or_else(|| dataset.as_deref().map(truth_path)).expect("clap requires one");
            let metrics = cmd_evaluate(&map, &truth, cfg.evaluation.match_gate)?;
            let text = to_json(&metrics);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                conetrack_cli::formats::write_text(&dir.join("evaluation.json"), &text)?;
            }
            Ok(text)
        }
        Command::ExportMap { map, config, out } => {
            let cfg = load_config(config.as_ref(), None)?;
            let n = cmd_export_map(&map, &cfg.mapping.midline, &out)?;
            Ok(format!("wrote landmarks and {n} midline waypoints to {}", out.display()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}
