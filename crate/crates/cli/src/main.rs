//! `markedshapes`: elastic shape distances, Karcher means, mark-weighted K
//! functions, random-labeling envelope tests and the simulation study.

mod commands;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use markedshapes::curves::DEFAULT_GRID_SIZE;
use markedshapes::pointprocess::{EdgeCorrection, TestFunction, DEFAULT_R_STEPS};
use markedshapes::registration::SymmetryGroup;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "markedshapes", version, about)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only warnings and errors on stderr.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Elastic distance between two curves.
    Distance(DistanceArgs),
    /// Curves along the geodesic between two curves.
    Geodesic(GeodesicArgs),
    /// Karcher mean of a directory of curves.
    Mean(MeanArgs),
    /// K and L functions of a marked pattern.
    EstimateK(EstimateKArgs),
    /// Random-labeling envelope test of a marked pattern.
    Test(TestArgs),
    /// Simulated patterns and the scenario study table.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PairArgs {
    /// First curve file (JSON [[x,y],...] or CSV with header x,y).
    pub a: PathBuf,
    /// Second curve file.
    pub b: PathBuf,
    /// shape, size-shape or orientation-shape.
    #[arg(long, default_value = "shape")]
    pub group: SymmetryGroup,
    /// Resampling grid size.
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pair: PairArgs,
    /// Directory for alignment.json and the manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pair: PairArgs,
    /// Number of curves, endpoints included.
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    /// Directory for geodesic.json, geodesic.csv and the manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MeanArgs {
    /// Directory of curve files.
    pub dir: PathBuf,
    #[arg(long, default_value = "shape")]
    pub group: SymmetryGroup,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub n: usize,
    /// Directory for mean.json, aligned.json, alignments.json, summary.json and the manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RadiusArgs {
    /// Edge correction: translational, minus or isotropic.
    #[arg(long, default_value = "translational")]
    pub correction: EdgeCorrection,
    /// Largest radius (default: a quarter of the shorter window side).
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Number of radii from 0 to rmax.
    #[arg(long, default_value_t = DEFAULT_R_STEPS)]
    pub rsteps: usize,
    /// Kernel bandwidth for the intensity (default: Cronie–van Lieshout selection).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Resampling grid size of the marks.
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateKArgs {
    /// Pattern file.
    pub pattern: PathBuf,
    /// ground, shape, size-shape or orientation-shape.
    #[arg(long, default_value = "shape")]
    pub group: TestFunction,
    #[command(flatten)]
    #[serde(flatten)]
    pub radius: RadiusArgs,
    /// CSV with columns r,K,L; the manifest goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    /// Pattern file.
    pub pattern: PathBuf,
    #[arg(long, default_value = "shape")]
    pub group: SymmetryGroup,
    /// Number of permutations.
    #[arg(long = "s", default_value_t = 2499)]
    pub s: usize,
    /// Pointwise envelope level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub radius: RadiusArgs,
    /// Directory for envelope.json, envelope.csv and the manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("output").required(true).multiple(true).args(["out_dir", "table"]))]
pub struct SimulateArgs {
    /// Three dependence digits (shape, orientation, size) such as 101, or "all".
    #[arg(long, default_value = "all")]
    pub scenario: String,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    /// Permutations per envelope test.
    #[arg(long = "s", default_value_t = 2499)]
    pub s: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Master seed (overrides the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid size of the marks (overrides the config file).
    #[arg(long)]
    pub n: Option<usize>,
    /// Scenario configuration, TOML or JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "translational")]
    pub correction: EdgeCorrection,
    #[arg(long, default_value_t = DEFAULT_R_STEPS)]
    pub rsteps: usize,
    /// Directory for the generated pattern files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Runs the study and writes its table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Distance(a) => commands::distance(a),
        Command::Geodesic(a) => commands::geodesic(a),
        Command::Mean(a) => commands::mean(a),
        Command::EstimateK(a) => commands::estimate_k(a),
        Command::Test(a) => commands::test(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
