//! `shrinkerlab`: build shrinkers, solve their spectra, run graphical flows,
//! verify barriers and evaluate Gaussian functionals.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input or a failed
//! verification, 3 numerical non-convergence.

mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use shrinkerlab::error::LabError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    NonConvergence(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Validation(_) => 2,
            Failure::NonConvergence(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
            Failure::NonConvergence(m) => write!(f, "did not converge: {m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Invalid(_) | LabError::Format(_) => Failure::Validation(e.to_string()),
            LabError::NonConvergence(_) => Failure::NonConvergence(e.to_string()),
            LabError::Io(_) => Failure::Internal(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "shrinkerlab", version, about = "Numerical laboratory for self-shrinkers of mean curvature flow")]
struct Cli {
    /// Directory that relative output paths are written into.
    #[arg(long, global = true, env = "SHRINKERLAB_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "SHRINKERLAB_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shrinker profiles.
    Shrinker {
        #[command(subcommand)]
        action: ShrinkerAction,
    },
    /// Weighted eigenproblems of the stability operator.
    Spectral {
        #[command(subcommand)]
        action: SpectralAction,
    },
    /// Graphical rescaled mean curvature flow.
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    /// Barrier residual checks.
    Barrier {
        #[command(subcommand)]
        action: BarrierAction,
    },
    /// Rotational translators bounded by a circle.
    Translator {
        #[command(subcommand)]
        action: TranslatorAction,
    },
    /// One-sided flows out of an unstable shrinker.
    Ancient {
        #[command(subcommand)]
        action: AncientAction,
    },
    /// Gaussian functionals and the conformal distance.
    Functional {
        #[command(subcommand)]
        action: FunctionalAction,
    },
    /// Run the acceptance suite and print one line per criterion.
    Selftest(Leaf<SelftestParams>),
}

#[derive(Subcommand)]
enum ShrinkerAction {
    /// Build or certify a profile and save it as JSON.
    Build(Leaf<BuildParams>),
}

#[derive(Subcommand)]
enum SpectralAction {
    /// Eigenpairs of L for one Fourier mode, or a Dirichlet ground state.
    Solve(Leaf<SpectralParams>),
}

#[derive(Subcommand)]
enum FlowAction {
    /// Evolve a normal graph over a shrinker and save the trace.
    Run(Leaf<FlowParams>),
}

#[derive(Subcommand)]
enum BarrierAction {
    /// Evaluate a barrier's residual grid and its sign condition.
    Verify(Leaf<BarrierParams>),
}

#[derive(Subcommand)]
enum TranslatorAction {
    /// Shoot the translator and check its weighted area bounds.
    Solve(Leaf<TranslatorParams>),
}

#[derive(Subcommand)]
enum AncientAction {
    /// Run from eps*phi and report sandwich, Li-Yau, exit-time and collapse diagnostics.
    Run(Leaf<AncientParams>),
}

#[derive(Subcommand)]
enum FunctionalAction {
    /// Gaussian area at the origin and unit scale.
    #[command(name = "F")]
    F(Leaf<FParams>),
    /// Supremum of the Gaussian functional over axis centers and scales.
    Entropy(Leaf<EntropyParams>),
    /// Gaussian density ratio of a self-similar flow or a saved trace.
    Density(Leaf<DensityParams>),
    /// Conformal distance between two sets in the metric weighted by 1/u.
    IlmanenDistance(Leaf<DistanceParams>),
}

// Flags shared by every leaf command around its own parameters.
#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct Leaf<P: Args> {
    /// JSON file with parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    params: P,
}

fn parse_json(s: &str) -> Result<Value, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct SurfaceParams {
    /// sphere, cylinder, plane, line, circle, torus or conical.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub half_length: Option<f64>,
    #[arg(long)]
    pub cone_slope: Option<f64>,
    /// Profile JSON to certify instead of a model.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Use the opposite unit normal.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub flip: Option<bool>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct BuildParams {
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
    /// Output profile JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
    /// Fourier mode m.
    #[arg(long)]
    pub mode: Option<i64>,
    /// Number of eigenpairs.
    #[arg(long)]
    pub count: Option<usize>,
    /// First node of a Dirichlet subdomain.
    #[arg(long)]
    pub dirichlet_lo: Option<usize>,
    /// Last node of a Dirichlet subdomain.
    #[arg(long)]
    pub dirichlet_hi: Option<usize>,
    /// CSV of eigenfunctions over the nodes.
    #[arg(long)]
    pub eigenfunction_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
    /// Initial data: constant, ground (a multiple of the ground state) or smooth (random field).
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tau_start: Option<f64>,
    #[arg(long)]
    pub tau_end: Option<f64>,
    #[arg(long)]
    pub psi0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// imex or rk4.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Steps between snapshots.
    #[arg(long)]
    pub every: Option<usize>,
    /// dirichlet or symmetric on open ends.
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct BarrierParams {
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
    /// global-plus, global-minus, compact-dirichlet, long-cylindrical, conical or translator.
    #[arg(long)]
    pub kind: Option<String>,
    /// Kind-specific parameters as a JSON object.
    #[arg(long, value_parser = parse_json)]
    pub params: Option<Value>,
    /// CSV residual grid.
    #[arg(long)]
    pub grid_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct TranslatorParams {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Height band for the weighted area check (defaults to the whole height).
    #[arg(long)]
    pub band_lo: Option<f64>,
    #[arg(long)]
    pub band_hi: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub residual_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct AncientParams {
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Second ε for the matched-level collapse comparison.
    #[arg(long)]
    pub eps_compare: Option<f64>,
    #[arg(long)]
    pub psi0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub every: Option<usize>,
    #[arg(long)]
    pub tau_span: Option<f64>,
    /// Multiple of the second m = 0 eigenfunction added to φ.
    #[arg(long)]
    pub second_mode: Option<f64>,
    #[arg(long)]
    pub li_yau_r: Option<f64>,
    #[arg(long)]
    pub dirichlet_lo: Option<usize>,
    #[arg(long)]
    pub dirichlet_hi: Option<usize>,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct FParams {
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct EntropyParams {
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
    #[arg(long)]
    pub center_min: Option<f64>,
    #[arg(long)]
    pub center_max: Option<f64>,
    #[arg(long)]
    pub center_step: Option<f64>,
    #[arg(long)]
    pub scale_min: Option<f64>,
    #[arg(long)]
    pub scale_max: Option<f64>,
    #[arg(long)]
    pub scale_count: Option<usize>,
    #[arg(long)]
    pub refinement_levels: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct DensityParams {
    /// The shrinker Σ of the flow √(T − t)Σ, or the base of a saved trace.
    #[command(flatten)]
    #[serde(default)]
    pub surface: SurfaceParams,
    /// Extinction time T of the self-similar flow.
    #[arg(long)]
    pub extinction: Option<f64>,
    /// Saved trace CSV (its sidecar is the same path with a .json extension).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub center_z: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Scales r, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct DistanceParams {
    /// First set: `sphere:<radius>` or a profile JSON path.
    #[arg(long)]
    pub first: Option<String>,
    #[arg(long)]
    pub second: Option<String>,
    #[arg(long)]
    pub center_z: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Ball radius R of the conformal factor.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Grid cells across the support radius.
    #[arg(long)]
    pub cells: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct SelftestParams {
    /// Run a single criterion (1 to 12).
    #[arg(long)]
    pub criterion: Option<usize>,
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::Validation("workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let out = report::Output { dir: cli.out_dir };
    use commands as c;
    match cli.command {
        Command::Shrinker { action: ShrinkerAction::Build(l) } => c::leaf(&out, l, c::shrinker_build),
        Command::Spectral { action: SpectralAction::Solve(l) } => c::leaf(&out, l, c::spectral_solve),
        Command::Flow { action: FlowAction::Run(l) } => c::leaf(&out, l, c::flow_run),
        Command::Barrier { action: BarrierAction::Verify(l) } => c::leaf(&out, l, c::barrier_verify),
        Command::Translator { action: TranslatorAction::Solve(l) } => c::leaf(&out, l, c::translator_solve_cmd),
        Command::Ancient { action: AncientAction::Run(l) } => c::leaf(&out, l, c::ancient_run),
        Command::Functional { action } => match action {
            FunctionalAction::F(l) => c::leaf(&out, l, c::functional_f),
            FunctionalAction::Entropy(l) => c::leaf(&out, l, c::functional_entropy),
            FunctionalAction::Density(l) => c::leaf(&out, l, c::functional_density),
            FunctionalAction::IlmanenDistance(l) => c::leaf(&out, l, c::functional_distance),
        },
        Command::Selftest(l) => c::leaf(&out, l, c::selftest),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("shrinkerlab: one or more checks failed (see pass_flags)");
            ExitCode::from(2)
        }
        Err(f) => {
            eprintln!("shrinkerlab: {f}");
            ExitCode::from(f.code())
        }
    }
}
