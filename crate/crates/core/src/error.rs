use thiserror::Error;

/// Errors raised by the analysis and bound routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("chain is not irreducible: {closed_classes} closed communicating classes, stationary law is not unique")]
    NotIrreducible { closed_classes: usize },

    #[error("invalid emission matrix: {0}")]
    InvalidEmission(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("initial law is not absolutely continuous w.r.t. pi (state {state} has pi = 0, nu > 0)")]
    DivergentDensity { state: usize },

    #[error("d(t) does not reach {epsilon} within horizon {horizon}")]
    Unresolved { horizon: usize, epsilon: f64 },

    #[error("spectral gap is degenerate (lambda = {lambda}); bound is infinite")]
    DegenerateGap { lambda: f64 },

    #[error("exact enumeration needs {cost} terms, cap is {cap}")]
    ExactTooLarge { cost: f64, cap: f64 },

    #[error("invalid value for `{field}`: {message}")]
    InvalidArgument { field: String, message: String },

    #[error("zeta({alpha}) = {zeta} is not below 3/2")]
    ZetaConstraint { alpha: f64, zeta: f64 },

    #[error("coefficients sum to {sum}; the affine offset is undefined at a unit root")]
    UnitRootOffset { sum: f64 },

    #[error("mixture weight {index} is zero")]
    ZeroMixtureWeight { index: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid CDF: {0}")]
    InvalidCdf(String),

    #[error("invalid margin loss: {0}")]
    InvalidLoss(String),

    #[error("statistic violates its declared bounded-difference coefficient at coordinate {coordinate}: change {change} > c = {coefficient}")]
    CoefficientBound {
        coordinate: usize,
        change: f64,
        coefficient: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },
}

impl Error {
    pub(crate) fn arg(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidChain(_) => "invalid_chain",
            Error::NotIrreducible { .. } => "not_irreducible",
            Error::InvalidEmission(_) => "invalid_emission",
            Error::InvalidPrior(_) => "invalid_prior",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DivergentDensity { .. } => "divergent_density",
            Error::Unresolved { .. } => "unresolved",
            Error::DegenerateGap { .. } => "degenerate_gap",
            Error::ExactTooLarge { .. } => "exact_too_large",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::ZetaConstraint { .. } => "zeta_constraint",
            Error::UnitRootOffset { .. } => "unit_root_offset",
            Error::ZeroMixtureWeight { .. } => "zero_mixture_weight",
            Error::InvalidNetwork(_) => "invalid_network",
            Error::InvalidCdf(_) => "invalid_cdf",
            Error::InvalidLoss(_) => "invalid_loss",
            Error::CoefficientBound { .. } => "coefficient_bound",
            Error::Numerical(_) => "numerical",
            Error::Parse { .. } => "parse",
        }
    }

    /// The input field the error refers to, when one can be named.
    pub fn field(&self) -> String {
        match self {
            Error::InvalidChain(_) | Error::NotIrreducible { .. } => "Q".into(),
            Error::InvalidEmission(_) => "emission".into(),
            Error::InvalidPrior(_) => "prior".into(),
            Error::DimensionMismatch { field, .. } => field.clone(),
            Error::DivergentDensity { .. } => "nu".into(),
            Error::Unresolved { .. } => "horizon".into(),
            Error::DegenerateGap { .. } => "lambda".into(),
            Error::ExactTooLarge { .. } => "n".into(),
            Error::InvalidArgument { field, .. } => field.clone(),
            Error::ZetaConstraint { .. } => "alpha".into(),
            Error::UnitRootOffset { .. } => "a".into(),
            Error::ZeroMixtureWeight { .. } => "alphas".into(),
            Error::InvalidNetwork(_) => "layers".into(),
            Error::InvalidCdf(_) => "cdf".into(),
            Error::InvalidLoss(_) => "phi".into(),
            Error::CoefficientBound { .. } => "c".into(),
            Error::Numerical(_) => "numerics".into(),
            Error::Parse { field, .. } => field.clone(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
