//! `genbound`: chain analysis, complexity estimates, generalization bounds,
//! reductions and verification experiments from the command line.

mod commands;
mod inputs;
mod output;
mod value;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::inputs::Failure;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "genbound", version, about = "Generalization bounds for learning from Markov chains")]
pub struct Cli {
    /// Master seed (decimal or 0x-prefixed hex).
    #[arg(long, global = true, env = "GENBOUND_SEED", default_value = "0xC0FFEE", value_parser = parse_seed)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte-Carlo replicas.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub replicas: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chain analysis, sampling and kernel estimation.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Rademacher and Gaussian complexities of a finite class.
    #[command(subcommand)]
    Complexity(ComplexityCmd),
    /// Generalization bounds.
    #[command(subcommand)]
    Bound(BoundCmd),
    /// Margin distributions and Levy distances.
    #[command(subcommand)]
    Margins(MarginsCmd),
    /// First-order lifts of higher-order recursions.
    #[command(subcommand)]
    Reduce(ReduceCmd),
    /// Simulation checks of the inequalities.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Debug, Subcommand)]
pub enum ChainCmd {
    /// Stationary law, gaps, chi-divergence and mixing times.
    Analyze(AnalyzeArgs),
    /// Draw a trajectory.
    Sample(SampleArgs),
    /// Estimate a kernel from a trajectory.
    Estimate(EstimateArgs),
}

#[derive(Debug, Subcommand)]
pub enum ComplexityCmd {
    /// Rademacher complexity.
    Rademacher(ComplexityArgs),
    /// Gaussian complexity.
    Gaussian(ComplexityArgs),
}

#[derive(Debug, Subcommand)]
pub enum BoundCmd {
    /// Margin bound for a Lipschitz upper loss.
    Thm1(MarginBoundArgs),
    /// Bound uniform over a dyadic family of ramp losses.
    Family(FamilyArgs),
    /// Two-sided deviation bound.
    TwoSided(MarginBoundArgs),
    /// PAC bound from a VC dimension.
    PacVc(PacVcArgs),
    /// Bound for a layered network with fixed budgets.
    DeepLayered(DeepArgs),
    /// Bound adaptive to the realised layer weights.
    DeepAdaptive(DeepArgs),
    /// Bound under a prior over chain parameters.
    Bayes(BayesArgs),
    /// Levy-distance bound between margin distributions.
    Levy(MarginBoundArgs),
    /// Uniform bound on the margin CDF.
    SupCdf(SupCdfArgs),
    /// Empirical and population gamma-margins.
    GammaMargin(GammaMarginArgs),
}

#[derive(Debug, Subcommand)]
pub enum MarginsCmd {
    /// Levy distance between two CDF documents.
    LevyDistance(LevyDistanceArgs),
    /// Empirical and population margin distributions.
    Distribution(DistributionArgs),
}

#[derive(Debug, Subcommand)]
pub enum ReduceCmd {
    /// Companion lift of a linear recursion.
    Companion(CompanionArgs),
    /// Lift of a recursion with a constant term.
    Affine(AffineArgs),
    /// ARMA lift, optionally discretised into a chain.
    Arma(ArmaArgs),
    /// Product lift of a mixture of chains.
    Mixture(MixtureArgs),
}

#[derive(Debug, Subcommand)]
pub enum VerifyCmd {
    /// Symmetrization inequalities.
    Symmetrization(VerifyClassArgs),
    /// Variance bound for a single function.
    Variance(VarianceArgs),
    /// Bounded-differences tail.
    Mcdiarmid(McdiarmidArgs),
    /// Empirical failure rate of a bound.
    Tail(TailArgs),
    /// Sign-swap identity for independent replicas.
    ReplicaIdentity(ReplicaArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisFlags {
    /// `pi-weighted` or `unweighted` norm for ||dnu/dpi - 1||.
    #[arg(long, default_value = "pi-weighted", value_parser = parse_enum::<genbound_core::NormConvention>)]
    pub convention: genbound_core::NormConvention,
    /// `guarded` or `literal` tau_min.
    #[arg(long, default_value = "guarded", value_parser = parse_enum::<genbound_core::GuardMode>)]
    pub guard: genbound_core::GuardMode,
    /// Fixed horizon for d(t); chosen automatically when absent.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Chain document.
    pub chain: PathBuf,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    pub chain: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// `initial` (X_1 ~ nu) or `stationary` (X_1 ~ pi).
    #[arg(long, default_value = "initial", value_parser = parse_enum::<genbound_core::chain::Start>)]
    pub start: genbound_core::chain::Start,
    /// Sample the labelled (HMM-lifted) chain when the document has an emission matrix.
    #[arg(long)]
    pub labelled: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Trajectory document.
    pub trajectory: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExactMode {
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub class: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "initial", value_parser = parse_enum::<genbound_core::chain::Start>)]
    pub start: genbound_core::chain::Start,
}

#[derive(Debug, Clone, Args)]
pub struct ComplexityArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Exact enumeration (Rademacher only).
    #[arg(long, value_enum, default_value = "never")]
    pub exact: ExactMode,
    /// Conditional complexity given this observed path.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundCommon {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 1.5)]
    pub t: f64,
    /// Observed path; sampled from the chain when absent.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Scale grid delta_k = 2^-k, k = 0..=levels.
    #[arg(long, default_value_t = 20)]
    pub levels: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub exact: ExactMode,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct MarginBoundArgs {
    #[command(flatten)]
    pub common: BoundCommon,
    /// `rademacher` or `gaussian`.
    #[arg(long, default_value = "rademacher", value_parser = parse_enum::<genbound_core::bounds::Flavor>)]
    pub flavor: genbound_core::bounds::Flavor,
    /// Piecewise-linear loss as a JSON list of `[x, y]` knots; ramp when absent.
    #[arg(long)]
    pub loss: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[command(flatten)]
    pub common: BoundCommon,
    /// Number of dyadic ramp losses.
    #[arg(long, default_value_t = 20)]
    pub family: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PacVcArgs {
    #[command(flatten)]
    pub common: BoundCommon,
    /// VC dimension of the base class.
    #[arg(long)]
    pub vc: usize,
    /// Absolute constant C.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DeepArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    /// Label of each state; taken from the emission labels when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub labels: Option<Vec<f64>>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.5)]
    pub t: f64,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub levels: usize,
    /// Exponent for the adaptive bound.
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct BayesArgs {
    #[command(flatten)]
    pub common: BoundCommon,
    /// Prior over the parameter values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub prior: Vec<f64>,
    /// Prior draws for a Monte-Carlo average; exact when absent.
    #[arg(long)]
    pub w_samples: Option<usize>,
    #[arg(long, default_value = "rademacher", value_parser = parse_enum::<genbound_core::bounds::Flavor>)]
    pub flavor: genbound_core::bounds::Flavor,
}

#[derive(Debug, Clone, Args)]
pub struct SupCdfArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.5)]
    pub t: f64,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct GammaMarginArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LevyDistanceArgs {
    /// Step CDF document.
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DistributionArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompanionArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    /// Steps of the dual simulation.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Initial window (X_0, X_-1, ...); ones when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct AffineArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct ArmaArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub c: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    /// Innovation standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Cells per lag for the discretized chain.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Discretization range `lo,hi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub range: Option<Vec<f64>>,
    /// Write the discretized chain document here.
    #[arg(long)]
    pub chain_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MixtureArgs {
    /// Component chain documents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub chains: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Counts `Y_k <= threshold`.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyClassArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub class: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct VarianceArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Function values per state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub n0: usize,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct McdiarmidArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Statistic is the path mean of these per-state values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
    /// Declared bounded-difference coefficients; tight ones when absent.
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    #[arg(long, default_value = "guarded", value_parser = parse_enum::<genbound_core::GuardMode>)]
    pub guard: genbound_core::GuardMode,
}

#[derive(Debug, Clone, Args)]
pub struct TailArgs {
    /// thm1-rademacher, thm1-gaussian, two-sided, dkw-lemma or levy-lemma.
    #[arg(long, value_parser = parse_enum::<genbound_core::verify::TailTarget>)]
    pub target: genbound_core::verify::TailTarget,
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub class: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.5)]
    pub t: f64,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ReplicaArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub class: PathBuf,
    #[arg(long)]
    pub n: usize,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

/// Parse a kebab-case enum through its serde representation.
fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match commands::run(&cli) {
        Ok((name, payload)) => {
            let doc = output::envelope(&name, payload);
            let text = output::render(&doc, format);
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        report_failure(&Failure::io(path, e));
                        return ExitCode::from(1);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            report_failure(&f);
            ExitCode::from(1)
        }
    }
}

fn report_failure(f: &Failure) {
    let doc = serde_json::json!({ "schema": output::SCHEMA, "error": output::to_value(f) });
    eprintln!("{}", output::to_json_string(&doc));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seed("0xC0FFEE").unwrap(), 0xC0FFEE);
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert!(parse_seed("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
