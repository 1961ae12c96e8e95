mod commands;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use report::{emit_json, error_envelope, RunConfig};

/// Hyperbolic polycycles: construction, displacement maps, bifurcating cycles.
#[derive(Debug, Parser)]
#[command(name = "polycycle", version = polycycle::VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the polynomial field realising a polycycle with given ratios.
    Build(BuildArgs),
    /// Graphic number, stability, sign-change count and subset conditions.
    Analyze(RatiosArgs),
    /// Integrate one orbit and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit the passage exponent at one saddle.
    Dulac(DulacArgs),
    /// Derivatives of the displacement maps at zero parameter.
    Melnikov(MelnikovArgs),
    /// Break one connection while keeping the others.
    Break(BreakArgs),
    /// Limit cycles near the polycycle, with a trapping boundary.
    Cycles(CyclesArgs),
    /// Roots of the nested power model map, or a search for many roots.
    Modelmap(ModelMapArgs),
    /// Strictly positive polynomial approximation of a bump function.
    BumpApprox(BumpArgs),
    /// Render reports and trajectories as an SVG phase portrait.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationArg {
    Cw,
    Ccw,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PolycycleArgs {
    /// Hyperbolicity ratios r_1,...,r_n.
    #[arg(long, value_delimiter = ',', required_unless_present = "field")]
    pub ratios: Option<Vec<f64>>,
    /// Report from build or break to load instead of building from ratios.
    #[arg(long, conflicts_with_all = ["ratios", "n"])]
    pub field: Option<PathBuf>,
    /// Number of saddles; must match the number of ratios when given.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "cw")]
    pub orientation: OrientationArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    pub poly: PolycycleArgs,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatiosArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub ratios: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub poly: PolycycleArgs,
    /// Parameters of the line-product family, one per connection.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
    /// Initial point x,y.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub x0: Vec<f64>,
    #[arg(long, default_value_t = 50.0, allow_hyphen_values = true)]
    pub t_end: f64,
    /// Trajectory CSV path (stdout when omitted).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Optional JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DulacArgs {
    #[command(flatten)]
    pub poly: PolycycleArgs,
    /// 1-based saddle index.
    #[arg(long, default_value_t = 1)]
    pub saddle: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub s_min: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub s_max: f64,
    #[arg(long, default_value_t = 9)]
    pub count: usize,
    /// Follow the passage backward in time (exponent 1/r).
    #[arg(long)]
    pub reversed: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    /// Line-product deformations along outward normals.
    Main3,
    /// Bumps centred on the section bases.
    Bump,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MelnikovArgs {
    #[command(flatten)]
    pub poly: PolycycleArgs,
    #[arg(long, value_enum, default_value = "main3")]
    pub family: FamilyArg,
    /// Bump radii for `--family bump`.
    #[arg(long, default_value_t = 0.05)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta2: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BreakArgs {
    #[command(flatten)]
    pub poly: PolycycleArgs,
    #[arg(long, value_enum, default_value = "main3")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 0.05)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta2: f64,
    /// Expulsion order: `auto` for a maximising order, or a 1-based permutation.
    #[arg(long, default_value = "auto")]
    pub plan: String,
    /// Size of the parameter that opens the expelled saddle.
    #[arg(long, default_value_t = 1e-4)]
    pub free: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CyclesArgs {
    #[command(flatten)]
    pub poly: PolycycleArgs,
    /// Break a connection first with this free value; 0 scans the unperturbed field.
    /// Defaults to 1e-4, or to the stored field when --field names a break report.
    #[arg(long)]
    pub free: Option<f64>,
    /// Signed coordinate window lo,hi on section 1 (default: 0.1 wide on the return side).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    #[arg(long, default_value_t = 60)]
    pub grid: usize,
    #[arg(long, default_value_t = 40)]
    pub levels: usize,
    /// Skip the trapping-boundary certification.
    #[arg(long)]
    pub no_trapping: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelMapArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub ratios: Vec<f64>,
    /// Offsets b_1,...,b_n (ignored by --search).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offsets: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Window lo,hi.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,0.3"
    )]
    pub window: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    pub grid: usize,
    /// Random search over offsets in [-bound, bound]^n.
    #[arg(long)]
    pub search: bool,
    #[arg(long, default_value_t = 0.05)]
    pub bound: f64,
    #[arg(long, default_value_t = 2)]
    pub target: usize,
    #[arg(long, default_value_t = 20_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 47)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BumpArgs {
    #[arg(long, default_value_t = 0.1)]
    pub delta1: f64,
    #[arg(long, default_value_t = 0.3)]
    pub delta2: f64,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,0"
    )]
    pub center: Vec<f64>,
    /// Approximation box xmin,ymin,xmax,ymax (default: the bump support, padded).
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
    pub domain: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Derivative order the approximation must control.
    #[arg(long, default_value_t = 0)]
    pub order: usize,
    /// Points per side of the validation grid.
    #[arg(long, default_value_t = 100)]
    pub validate: usize,
    /// Include the Bernstein samples in the report.
    #[arg(long)]
    pub coefficients: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlotArgs {
    /// Reports from build, break or cycles.
    #[arg(long)]
    pub report: Vec<PathBuf>,
    /// Trajectory CSV files from simulate.
    #[arg(long)]
    pub trajectory: Vec<PathBuf>,
    #[arg(long, default_value_t = 600)]
    pub size: u32,
    #[arg(long, required = true)]
    pub out: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Build(_) => "build",
            Command::Analyze(_) => "analyze",
            Command::Simulate(_) => "simulate",
            Command::Dulac(_) => "dulac",
            Command::Melnikov(_) => "melnikov",
            Command::Break(_) => "break",
            Command::Cycles(_) => "cycles",
            Command::Modelmap(_) => "modelmap",
            Command::BumpApprox(_) => "bump-approx",
            Command::Plot(_) => "plot",
        }
    }

    fn config(&self) -> RunConfig {
        use report::to_value;
        let (parameters, out, extra, seed) = match self {
            Command::Build(a) => (to_value(a), a.out.clone(), None, None),
            Command::Analyze(a) => (to_value(a), a.out.clone(), None, None),
            Command::Simulate(a) => (to_value(a), a.out.clone(), a.csv.clone(), None),
            Command::Dulac(a) => (to_value(a), a.out.clone(), None, None),
            Command::Melnikov(a) => (to_value(a), a.out.clone(), None, None),
            Command::Break(a) => (to_value(a), a.out.clone(), None, None),
            Command::Cycles(a) => (to_value(a), a.out.clone(), None, None),
            Command::Modelmap(a) => (to_value(a), a.out.clone(), None, a.search.then_some(a.seed)),
            Command::BumpApprox(a) => (to_value(a), a.out.clone(), None, None),
            Command::Plot(a) => (to_value(a), None, Some(a.out.clone()), None),
        };
        RunConfig {
            command: self.name().to_string(),
            parameters,
            seed,
            outputs: serde_json::json!({ "json": out, "artifact": extra }),
        }
    }

    /// Where reports go, including error reports.
    fn json_out(&self) -> Option<PathBuf> {
        match self {
            Command::Build(a) => a.out.clone(),
            Command::Analyze(a) => a.out.clone(),
            Command::Simulate(a) => a.out.clone(),
            Command::Dulac(a) => a.out.clone(),
            Command::Melnikov(a) => a.out.clone(),
            Command::Break(a) => a.out.clone(),
            Command::Cycles(a) => a.out.clone(),
            Command::Modelmap(a) => a.out.clone(),
            Command::BumpApprox(a) => a.out.clone(),
            Command::Plot(_) => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let config = cli.command.config();
    let outcome = match &cli.command {
        Command::Build(a) => commands::build(a, &config),
        Command::Analyze(a) => commands::analyze(a, &config),
        Command::Simulate(a) => commands::simulate(a, &config),
        Command::Dulac(a) => commands::dulac(a, &config),
        Command::Melnikov(a) => commands::melnikov(a, &config),
        Command::Break(a) => commands::breaking(a, &config),
        Command::Cycles(a) => commands::cycles(a, &config),
        Command::Modelmap(a) => commands::modelmap(a, &config),
        Command::BumpApprox(a) => commands::bump_approx(a, &config),
        Command::Plot(a) => commands::plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "polycycle {}: {} error: {}",
                config.command,
                f.kind(),
                f.message()
            );
            let report = error_envelope(&config, &f);
            let target = cli.command.json_out();
            if let Err(e) = emit_json(target.as_deref(), &report) {
                eprintln!("could not write the error report: {}", e.message());
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
