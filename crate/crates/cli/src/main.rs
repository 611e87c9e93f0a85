mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "qdtune",
    version,
    about = "Simulate, classify and autotune double quantum dots"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (JSON). Missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the command's main random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files; without it the main document goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// fixed75, fixed100 or dynamic.
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// `sim` or `scan:<path>`.
    #[arg(long, global = true, default_value = "sim")]
    pub source: String,
    /// `oracle` or `model:<path>`.
    #[arg(long, global = true, default_value = "oracle")]
    pub classifier: String,
    /// Worker threads; defaults to the config value, then to all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a device from the stand-in distribution, or emit the configured one.
    SampleDevice,
    /// Render a scan of the configured device to a scan file.
    RenderScan(RenderArgs),
    /// Generate a labelled training set.
    GenDataset(DatasetArgs),
    /// Train the classifier on a dataset and report held-out accuracy.
    Train(TrainArgs),
    /// Score a trained model on a dataset.
    Evaluate(EvaluateArgs),
    /// A single tuning run.
    Tune(TuneArgs),
    /// 81-run neighborhood experiments for every configured point and policy.
    Neighborhood(NeighborhoodArgs),
    /// Success map over a lattice of start points.
    Heatmap,
    /// Fitness of every window position over a scan.
    Landscape(LandscapeArgs),
    /// Rebuild the tables and summary from a saved neighborhood report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Window center `v1,v2` in mV.
    #[arg(long, value_parser = parse_pair, default_value = "300,300")]
    pub center: (f64, f64),
    /// Side length in mV.
    #[arg(long, default_value_t = 600.0)]
    pub span: f64,
    #[arg(long, default_value_t = 2.0)]
    pub resolution: f64,
    /// Device file from `sample-device`; defaults to the configured device.
    #[arg(long)]
    pub device: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 1001)]
    pub devices: usize,
    #[arg(long, default_value_t = 10)]
    pub per_device: usize,
    /// Render windows without sensor noise.
    #[arg(long)]
    pub clean: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Start point `v1,v2` in mV.
    #[arg(long, value_parser = parse_pair)]
    pub start: (f64, f64),
}

#[derive(Debug, Args)]
pub struct NeighborhoodArgs {
    /// Replace the configured points; repeatable.
    #[arg(long = "point", value_parser = parse_pair)]
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    /// Window side in native pixels; defaults to the config value.
    #[arg(long)]
    pub window_px: Option<usize>,
    /// Scan center `v1,v2` when rendering from the simulator.
    #[arg(long, value_parser = parse_pair, default_value = "325,350")]
    pub center: (f64, f64),
    /// Scan side in mV when rendering from the simulator.
    #[arg(long, default_value_t = 400.0)]
    pub span: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `neighborhood.json` written by the `neighborhood` command.
    #[arg(long)]
    pub input: PathBuf,
}

fn parse_pair(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `v1,v2`, got `{text}`"))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("`{s}` is not a number: {e}"))
    };
    Ok((num(a)?, num(b)?))
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<qdtune_core::Error>() {
            return e.kind();
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "cli"
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(error_kind(&e), &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
