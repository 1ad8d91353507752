mod eval;
mod failure;
mod gen;
mod io;
mod manifest;
mod plot;
mod predict;
mod report;
mod train;
mod tune;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scanmask::metrics::LossKind;
use scanmask::ReconKind;

use crate::failure::exit_code;

#[derive(Parser)]
#[command(name = "scanmask", version, about = "Scan-adaptive Cartesian k-space mask optimization")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic multi-coil phantom scans.
    GenData(GenArgs),
    /// Alternate mask optimization and reconstructor tuning on the training split.
    Train(TrainArgs),
    /// Tune a reconstructor on the training split under a run's masks.
    Tune(TuneArgs),
    /// Predict masks for test scans from a trained mask library.
    Predict(PredictArgs),
    /// Reconstruct test scans under several mask sources and write metrics.
    Eval(EvalArgs),
    /// Summarize metrics CSVs into tables and plots.
    Report(ReportArgs),
}

#[derive(clap::Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub train: usize,
    #[arg(long, default_value_t = 10)]
    pub test: usize,
    #[arg(long, num_args = 2, value_names = ["H", "W"], default_values_t = [64, 64])]
    pub size: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub coils: usize,
    #[arg(long, default_value_t = 0.005)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace an existing non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub budget: usize,
    #[arg(long, default_value_t = 6)]
    pub lowfreq: usize,
    #[arg(long = "icd-iters", default_value_t = 1)]
    pub icd_iters: usize,
    #[arg(long, default_value = "zero-filled")]
    pub recon: ReconKind,
    #[arg(long, default_value = "nmse", value_parser = parse_loss)]
    pub loss: LossKind,
    /// Central-crop fraction applied before every loss and metric.
    #[arg(long)]
    pub crop: Option<f64>,
    /// Let coordinate descent move the central block.
    #[arg(long)]
    pub unfreeze_lowfreq: bool,
    /// Also optimize one shared mask over the whole training split.
    #[arg(long)]
    pub population: bool,
    /// Scale library features to unit norm before matching.
    #[arg(long)]
    pub normalize_features: bool,
    #[arg(long, default_value_t = 0)]
    pub vdrs_seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub density_power: f64,
    #[arg(long)]
    pub force: bool,
}

#[derive(clap::Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub recon: ReconKind,
    /// Which of the run's mask sets to tune on: final, greedy or vdrs.
    #[arg(long, default_value = "final")]
    pub masks: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct PredictArgs {
    /// Run directory or mask library directory.
    #[arg(long)]
    pub library: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub run: PathBuf,
    /// Comma-separated mask sources: vdrs, nn, oracle-icd, population.
    #[arg(long, value_delimiter = ',', default_value = "vdrs,nn,oracle-icd")]
    pub masks: Vec<String>,
    /// Reconstructor for the optimized masks (default: the run's final one).
    #[arg(long)]
    pub recon: Option<PathBuf>,
    /// Reconstructor for the random masks (default: the run's random-mask one).
    #[arg(long)]
    pub recon_vdrs: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    match s {
        "nmse" => Ok(LossKind::Nmse),
        "ssim" => Ok(LossKind::Ssim),
        "hfen" => Ok(LossKind::Hfen),
        "nmse-magnitude" => Ok(LossKind::NmseMagnitude),
        other => Err(format!("unknown loss `{other}` (nmse, ssim, hfen, nmse-magnitude)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot start {} worker threads: {e}", cli.jobs);
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::GenData(a) => gen::run(&a),
        Command::Train(a) => train::run(&a),
        Command::Tune(a) => tune::run(&a),
        Command::Predict(a) => predict::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Report(a) => report::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
