use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use dnls_mi::experiments::Preset;

#[derive(Parser)]
#[command(
    name = "dnls-mi",
    version,
    about = "Modulational instability of two-component lattice condensates"
)]
pub struct Cli {
    /// Cap on worker threads
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Excitation spectrum at one (k, q) point
    Spectrum(SpectrumArgs),
    /// Stability classes over the (q, k) plane
    PhaseDiagram(PhaseDiagramArgs),
    /// Evolve a modulated plane wave and write the run directory
    Simulate(SimulateArgs),
    /// Simulate and fit the sideband growth rate
    GrowthRate(GrowthRateArgs),
    /// Run the self-consistency suites
    Validate(ValidateArgs),
}

/// Model parameters; unset values fall back to the preset, config file, or
/// the miscible reference set.
#[derive(Args, Clone, Default)]
pub struct ParamArgs {
    /// Hopping of species 1 (and species 2 unless --K2 is given)
    #[arg(long = "K")]
    pub hopping: Option<f64>,
    /// Hopping of species 2
    #[arg(long = "K2")]
    pub hopping2: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda12: Option<f64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("carrier").required(true).args(["k", "l"])))]
#[command(group(ArgGroup::new("perturbation").required(true).args(["q", "s"])))]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Background density per species
    #[arg(long)]
    pub psi0sq: Option<f64>,
    /// Carrier wave number in radians
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    /// Perturbation wave number in radians
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Carrier index, k = 2πl/sites
    #[arg(long)]
    pub l: Option<usize>,
    /// Perturbation index, q = 2πs/sites
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 400)]
    pub sites: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Auto,
    ClosedForm,
    Matrix,
}

#[derive(Args)]
pub struct PhaseDiagramArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// fig1a or fig1b
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub psi0sq: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub q_steps: usize,
    #[arg(long, default_value_t = 400)]
    pub k_steps: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    /// Output directory for grid.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Fail if any cell could not be evaluated
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// fig2a, fig2b, fig2c, fig3a or fig3b
    #[arg(long)]
    pub preset: Option<Preset>,
    /// JSON run configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub sites: Option<usize>,
    /// Modulation amplitude as a fraction of the background amplitude
    #[arg(long)]
    pub alpha_ratio: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Run directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args)]
pub struct GrowthRateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Expected growth rate; exit 1 if the fit misses it
    #[arg(long)]
    pub expect: Option<f64>,
    #[arg(long, default_value_t = 0.05, requires = "expect")]
    pub rtol: f64,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}
