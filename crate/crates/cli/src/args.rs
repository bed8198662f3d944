use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "povmcert",
    version,
    about = "Randomness certification for symmetric qubit POVMs"
)]
pub struct Cli {
    /// Run seed; drawn from OS entropy (and recorded) when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a geometry and print its JSON record.
    Povm(PovmArgs),
    /// Certified min-entropy for a state or observed statistics.
    Certify(CertifyArgs),
    /// Guessing probability from the LP oracle, with Eve's strategy.
    Oracle(OracleArgs),
    /// Entropy map over the disk or the ball.
    Scan(ScanArgs),
    /// Extremal entropies against N.
    Bounds(BoundsArgs),
    /// Simulate a heralded measurement run.
    Simulate(SimulateArgs),
    /// Count coincidences in a timetag file.
    Ingest(IngestArgs),
    /// Maximum-likelihood reconstruction from counts.
    Mle(MleArgs),
    /// Reproduce the measurement tables.
    Tables(TablesArgs),
    /// Write figure datasets.
    Figures(FiguresArgs),
    /// Run the invariant audit.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Povm(_) => "povm",
            Command::Certify(_) => "certify",
            Command::Oracle(_) => "oracle",
            Command::Scan(_) => "scan",
            Command::Bounds(_) => "bounds",
            Command::Simulate(_) => "simulate",
            Command::Ingest(_) => "ingest",
            Command::Mle(_) => "mle",
            Command::Tables(_) => "tables",
            Command::Figures(_) => "figures",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GeometryArg {
    /// JSON file, configured name (F3, S6, ...), `N`, `polygon:N@deg` or a solid name.
    #[arg(long)]
    pub geometry: String,
    /// In-plane rotation of a polygon, degrees.
    #[arg(long)]
    pub orientation_deg: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PovmArgs {
    #[command(flatten)]
    pub geometry: GeometryArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct TargetArg {
    /// Bloch vector as `rz,rx,ry`.
    #[arg(long, allow_hyphen_values = true)]
    pub state: Option<String>,
    /// Named preparation (H, V, +, -, L, R, int, rot:pi/8, bloch:x,y,z).
    #[arg(long)]
    pub prep: Option<String>,
    /// Outcome probabilities, inline `p0,p1,...` or a file.
    #[arg(long)]
    pub probs: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub geometry: GeometryArg,
    #[command(flatten)]
    pub target: TargetArg,
    /// Use the LP oracle instead of the closed form.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 720)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub geometry: GeometryArg,
    #[command(flatten)]
    pub target: TargetArg,
    #[arg(long, default_value_t = 720)]
    pub grid: usize,
    /// Polish grid atoms by local search after the LP.
    #[arg(long)]
    pub refine: bool,
    /// JSON output (the default).
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainArg {
    Disk,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Analytic,
    Oracle,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct ScanShape {
    /// Regular polygon with N outcomes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Platonic solid.
    #[arg(long)]
    pub solid: Option<String>,
    #[arg(long)]
    pub geometry: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub shape: ScanShape,
    #[arg(long)]
    pub orientation_deg: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub res: usize,
    /// Defaults to disk for polygons and ball for solids.
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 720)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 100)]
    pub nmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub geometry: GeometryArg,
    #[arg(long)]
    pub prep: String,
    /// Experiment TOML; the built-in one when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of heralds (with unit efficiency, coincidences).
    #[arg(long, conflicts_with = "duration")]
    pub coincidences: Option<u64>,
    /// Acquisition time in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub pair_rate: Option<f64>,
    /// Per-detector accidental rate in Hz.
    #[arg(long)]
    pub accidental_rate: Option<f64>,
    #[arg(long)]
    pub efficiency: Option<f64>,
    #[arg(long)]
    pub jitter_ps: Option<f64>,
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Sample counts directly instead of writing a timetag stream.
    #[arg(long)]
    pub counts_only: bool,
    /// Timetag file (`.bin` for binary) or, with --counts-only, a counts CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct IngestShape {
    #[arg(long)]
    pub geometry: Option<String>,
    /// Number of detector channels, when no geometry is given.
    #[arg(long)]
    pub outcomes: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Timetag file (`.bin` for binary, CSV otherwise).
    #[arg(long)]
    pub timetags: PathBuf,
    #[command(flatten)]
    pub shape: IngestShape,
    #[arg(long, default_value_t = 1.0)]
    pub window_ns: f64,
    #[arg(long, default_value_t = 0)]
    pub herald_channel: u8,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MleArgs {
    #[command(flatten)]
    pub geometry: GeometryArg,
    /// `outcome_index,count` CSV.
    #[arg(long)]
    pub counts: PathBuf,
    /// Prepared state, for the theoretical entropy column.
    #[arg(long)]
    pub true_state: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dilution: f64,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceArg {
    Counts,
    Timetags,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TablesArgs {
    /// T1..T4 or `all`.
    #[arg(required = true)]
    pub ids: Vec<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SourceArg::Counts)]
    pub source: SourceArg,
    #[arg(long)]
    pub coincidences: Option<u64>,
    #[arg(long, conflicts_with = "calibrated")]
    pub accidental_rate: Option<f64>,
    /// Use the configured calibrated accidental rate.
    #[arg(long)]
    pub calibrated: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FiguresArgs {
    /// F1, F2, F3 or `all`.
    #[arg(required = true)]
    pub ids: Vec<String>,
    #[arg(long, default_value_t = 400)]
    pub res: usize,
    #[arg(long, default_value_t = 100)]
    pub nmax: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaArg {
    Correct,
    Misprint,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Extra geometry file to audit (read without validation).
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlphaArg::Correct)]
    pub alpha_variant: AlphaArg,
    #[arg(long, default_value_t = 100)]
    pub states_per_n: usize,
    #[arg(long, default_value_t = 101)]
    pub disk_res: usize,
    #[arg(long, default_value_t = 6)]
    pub ball_res: usize,
}
