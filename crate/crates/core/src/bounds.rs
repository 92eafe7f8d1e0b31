//! Closed-form generalization bounds for classes learned from one Markov path.
//!
//! Every margin-type bound is an infimum over a finite grid of scale
//! parameters of a sum of named terms. Each report keeps the per-grid-point
//! decomposition, and `bound_raw` is always the minimum of
//! [`DeltaTerms::total`] over that decomposition, bit for bit.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::ChainAnalysis;
use crate::chain::Trajectory;
use crate::empirical::{ComplexityEstimate, FunctionClass};
use crate::error::{Error, Result};
use crate::rng::{stream, MeanEstimate};

/// Terms of the partial zeta sum.
pub const ZETA_TERMS: u64 = 1_000_000;

/// Default scale grid `2^-k`, `k = 0..=20`.
pub fn dyadic_grid(levels: usize) -> Vec<f64> {
    (0..=levels).map(|k| 0.5f64.powi(k as i32)).collect()
}

pub fn default_grid() -> Vec<f64> {
    dyadic_grid(20)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::arg("delta_grid", "grid is empty"));
    }
    if let Some(d) = grid.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::arg("delta_grid", format!("{d} is outside (0, 1]")));
    }
    Ok(())
}

/// `log log_2 (2/delta)`; zero at `delta = 1`.
pub fn loglog(delta: f64) -> f64 {
    (2.0 / delta).log2().ln().max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// 1 on `(-inf, 0]`, `1 - x` on `(0, 1)`, 0 on `[1, inf)`.
    RampUpper,
    /// 1 on `(-inf, -1]`, `-x` on `(-1, 0)`, 0 on `[0, inf)`.
    RampLower,
    /// `1{x <= 0}`.
    Indicator,
    /// Piecewise linear through the given knots, constant outside them.
    Custom,
}

/// A margin loss `phi(scale * x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginLoss {
    pub kind: LossKind,
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub knots: Vec<[f64; 2]>,
}

impl MarginLoss {
    pub fn ramp_upper() -> Self {
        MarginLoss {
            kind: LossKind::RampUpper,
            scale: 1.0,
            knots: Vec::new(),
        }
    }

    pub fn ramp_lower() -> Self {
        MarginLoss {
            kind: LossKind::RampLower,
            scale: 1.0,
            knots: Vec::new(),
        }
    }

    pub fn indicator() -> Self {
        MarginLoss {
            kind: LossKind::Indicator,
            scale: 1.0,
            knots: Vec::new(),
        }
    }

    /// Piecewise-linear loss through `(x, y)` knots with strictly increasing `x`.
    pub fn table(knots: Vec<[f64; 2]>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidLoss("table has no knots".into()));
        }
        if knots.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLoss("table has non-finite entries".into()));
        }
        if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidLoss("knot abscissae must increase strictly".into()));
        }
        Ok(MarginLoss {
            kind: LossKind::Custom,
            scale: 1.0,
            knots,
        })
    }

    /// `x -> phi(s x)`.
    pub fn scaled(&self, s: f64) -> Self {
        MarginLoss {
            scale: self.scale * s,
            ..self.clone()
        }
    }

    fn base(&self, x: f64) -> f64 {
        match self.kind {
            LossKind::RampUpper => (1.0 - x).clamp(0.0, 1.0),
            LossKind::RampLower => (-x).clamp(0.0, 1.0),
            LossKind::Indicator => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Custom => {
                let k = &self.knots;
                if x <= k[0][0] {
                    return k[0][1];
                }
                if x >= k[k.len() - 1][0] {
                    return k[k.len() - 1][1];
                }
                let i = k.partition_point(|p| p[0] <= x);
                let (a, b) = (k[i - 1], k[i]);
                a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.base(self.scale * x)
    }

    /// Lipschitz constant `L(phi)`.
    pub fn lipschitz(&self) -> f64 {
        let base = match self.kind {
            LossKind::RampUpper | LossKind::RampLower => 1.0,
            LossKind::Indicator => f64::INFINITY,
            LossKind::Custom => self
                .knots
                .windows(2)
                .map(|w| ((w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).abs())
                .fold(0.0, f64::max),
        };
        base * self.scale.abs()
    }

    fn knot_xs(&self) -> Vec<f64> {
        match self.kind {
            LossKind::RampUpper => vec![0.0, 1.0],
            LossKind::RampLower => vec![-1.0, 0.0],
            LossKind::Indicator => vec![0.0],
            LossKind::Custom => self.knots.iter().map(|k| k[0]).collect(),
        }
    }

    /// `phi >= 1{x <= 0}` everywhere and `phi` nonincreasing.
    pub fn is_upper(&self) -> bool {
        if self.scale <= 0.0 {
            return false;
        }
        match self.kind {
            LossKind::RampUpper | LossKind::Indicator => true,
            LossKind::RampLower => false,
            LossKind::Custom => {
                let k = &self.knots;
                let nonincreasing = k.windows(2).all(|w| w[1][1] <= w[0][1]);
                // piecewise linear: the extreme values over each half-line sit at knots,
                // the left tail, or the value at 0
                let left_ok = k[0][1] >= 1.0
                    && self.base(0.0) >= 1.0
                    && k.iter().filter(|p| p[0] <= 0.0).all(|p| p[1] >= 1.0);
                let right_ok = k[k.len() - 1][1] >= 0.0 && k.iter().all(|p| p[1] >= 0.0);
                nonincreasing && left_ok && right_ok
            }
        }
    }

    /// `phi <= 1{x <= 0}` everywhere.
    pub fn is_lower(&self) -> bool {
        if self.scale <= 0.0 {
            return false;
        }
        match self.kind {
            LossKind::RampLower | LossKind::Indicator => true,
            LossKind::RampUpper => false,
            LossKind::Custom => {
                let k = &self.knots;
                let at_zero = self.base(0.0) <= 1.0;
                let left = k[0][1] <= 1.0 && k.iter().filter(|p| p[0] <= 0.0).all(|p| p[1] <= 1.0);
                let right = k.iter().filter(|p| p[0] > 0.0).all(|p| p[1] <= 0.0)
                    && k[k.len() - 1][1] <= 0.0
                    && (k.iter().all(|p| p[0] <= 0.0) || self.base(f64::MIN_POSITIVE) <= 0.0);
                at_zero && left && right
            }
        }
    }

    /// Points at which the defining inequalities are checked.
    pub fn check_points(&self) -> Vec<f64> {
        let mut xs = self.knot_xs();
        xs.push(0.0);
        xs.iter().map(|x| x / self.scale).collect()
    }
}

/// `A_n = sqrt(2M/(n(1-lambda)) + 64 M^2 chi/(n^2 (1-lambda)^2))`.
pub fn a_n(m: f64, n: usize, lambda: f64, chi_div: f64) -> Result<f64> {
    if lambda >= 1.0 {
        return Err(Error::DegenerateGap { lambda });
    }
    let nf = n as f64;
    let gap = 1.0 - lambda;
    Ok((2.0 * m / (nf * gap) + 64.0 * m * m / (nf * nf * gap * gap) * chi_div).sqrt())
}

/// `B_n = A_n` at `M = 1`.
pub fn b_n(n: usize, lambda: f64, chi_div: f64) -> Result<f64> {
    a_n(1.0, n, lambda, chi_div)
}

/// `A~_n = (M/(2n)) (sqrt(2 tau_min n log n) + sqrt(n) + 4)`.
pub fn a_tilde_n(m: f64, n: usize, tau_min: f64) -> f64 {
    let nf = n as f64;
    m / (2.0 * nf) * ((2.0 * tau_min * nf * nf.ln()).sqrt() + nf.sqrt() + 4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetrizationTerms {
    pub m: f64,
    pub n: usize,
    pub lambda: f64,
    pub chi_div: f64,
    pub tau_min: f64,
    pub a_n: f64,
    pub a_tilde_n: f64,
    pub b_n: f64,
}

pub fn symmetrization_terms(m: f64, n: usize, lambda: f64, chi_div: f64, tau_min: f64) -> Result<SymmetrizationTerms> {
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    if !(chi_div >= 0.0) {
        return Err(Error::arg("chi_div", "must be >= 0"));
    }
    Ok(SymmetrizationTerms {
        m,
        n,
        lambda,
        chi_div,
        tau_min,
        a_n: a_n(m, n, lambda, chi_div)?,
        a_tilde_n: a_tilde_n(m, n, tau_min),
        b_n: b_n(n, lambda, chi_div)?,
    })
}

/// Chain constants entering every bound at sample size `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovConstants {
    pub n: usize,
    pub lambda: f64,
    pub chi_div: f64,
    pub tau_min: f64,
    pub b_n: f64,
}

impl MarkovConstants {
    pub fn new(n: usize, lambda: f64, chi_div: f64, tau_min: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "must be at least 1"));
        }
        if !(tau_min >= 0.0) {
            return Err(Error::arg("tau_min", "must be >= 0"));
        }
        Ok(MarkovConstants {
            n,
            lambda,
            chi_div,
            tau_min,
            b_n: b_n(n, lambda, chi_div)?,
        })
    }

    pub fn from_analysis(a: &ChainAnalysis, n: usize) -> Result<Self> {
        MarkovConstants::new(n, a.lambda, a.chi_div, a.tau_min)
    }

    /// `sqrt(tau_min / n)`.
    pub fn rate(&self) -> f64 {
        (self.tau_min / self.n as f64).sqrt()
    }
}

/// One point of the scale grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaTerms {
    /// Scale `delta`, absent for family members and scalar bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// 1-based family index, absent for grid bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub empirical: f64,
    pub empirical_stderr: f64,
    pub complexity: f64,
    pub tail: f64,
    pub loglog: f64,
    pub capacity: f64,
    pub slack: f64,
    pub b_n: f64,
    pub total: f64,
}

impl DeltaTerms {
    /// Fixed summation order shared by construction and recomputation.
    pub fn sum(&self) -> f64 {
        self.empirical + self.complexity + self.tail + self.loglog + self.capacity + self.slack + self.b_n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionBound {
    pub name: String,
    pub bound_raw: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmin_delta: Option<f64>,
    pub argmin_index: usize,
    /// The quantity being bounded, evaluated under `pi` when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: String,
    /// What is bounded, e.g. `P{f <= 0}`.
    pub target: String,
    pub n: usize,
    pub t: f64,
    pub confidence: f64,
    pub confidence_raw: f64,
    pub constants: MarkovConstants,
    pub complexity: f64,
    pub complexity_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<MarginLoss>,
    pub delta_grid: Vec<f64>,
    /// Function whose bound is reported (the largest one).
    pub function: String,
    pub function_index: usize,
    pub bound_raw: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmin_delta: Option<f64>,
    pub argmin_index: usize,
    pub decomposition: Vec<DeltaTerms>,
    pub per_function: Vec<FunctionBound>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub extras: serde_json::Map<String, serde_json::Value>,
    pub caveats: Vec<String>,
}

impl BoundReport {
    /// Minimum of the decomposition totals, recomputed from the parts.
    pub fn recompute(&self) -> f64 {
        self.decomposition
            .iter()
            .map(DeltaTerms::sum)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn per_function_table(&self) -> &[FunctionBound] {
        &self.per_function
    }
}

fn clamp01(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Deterministic part of one grid row.
#[derive(Debug, Clone)]
struct Row {
    delta: Option<f64>,
    k: Option<usize>,
    complexity: f64,
    tail: f64,
    loglog: f64,
    capacity: f64,
    slack: f64,
    b_n: f64,
}

impl Row {
    fn with_empirical(&self, empirical: f64, stderr: f64) -> DeltaTerms {
        let mut d = DeltaTerms {
            delta: self.delta,
            k: self.k,
            empirical,
            empirical_stderr: stderr,
            complexity: self.complexity,
            tail: self.tail,
            loglog: self.loglog,
            capacity: self.capacity,
            slack: self.slack,
            b_n: self.b_n,
            total: 0.0,
        };
        d.total = d.sum();
        d
    }
}

/// Index of the first minimal total.
fn argmin(terms: &[DeltaTerms]) -> usize {
    let mut best = 0;
    for (i, d) in terms.iter().enumerate() {
        if d.total < terms[best].total {
            best = i;
        }
    }
    best
}

struct Assembled {
    per_function: Vec<FunctionBound>,
    decompositions: Vec<Vec<DeltaTerms>>,
}

/// Build per-function decompositions from `empirical(f, row) -> (value, stderr)`.
fn assemble(
    class: &FunctionClass,
    rows: &[Row],
    true_value: impl Fn(usize) -> Option<f64>,
    empirical: impl Fn(usize, usize) -> (f64, f64),
) -> Assembled {
    let mut per_function = Vec::with_capacity(class.len());
    let mut decompositions = Vec::with_capacity(class.len());
    for fi in 0..class.len() {
        let terms: Vec<DeltaTerms> = rows
            .iter()
            .enumerate()
            .map(|(ri, r)| {
                let (v, s) = empirical(fi, ri);
                r.with_empirical(v, s)
            })
            .collect();
        let best = argmin(&terms);
        per_function.push(FunctionBound {
            name: class.names()[fi].clone(),
            bound_raw: terms[best].total,
            bound: clamp01(terms[best].total),
            argmin_delta: terms[best].delta,
            argmin_index: best,
            true_value: true_value(fi).map(|v| v + 0.0),
        });
        decompositions.push(terms);
    }
    Assembled {
        per_function,
        decompositions,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    theorem: &str,
    target: &str,
    t: f64,
    confidence_raw: f64,
    constants: &MarkovConstants,
    complexity: Option<&ComplexityEstimate>,
    loss: Option<&MarginLoss>,
    grid: Vec<f64>,
    assembled: Assembled,
) -> BoundReport {
    let Assembled {
        per_function,
        mut decompositions,
    } = assembled;
    let mut worst = 0;
    for (i, f) in per_function.iter().enumerate() {
        if f.bound_raw > per_function[worst].bound_raw {
            worst = i;
        }
    }
    let head = &per_function[worst];
    BoundReport {
        theorem: theorem.into(),
        target: target.into(),
        n: constants.n,
        t,
        confidence: clamp01(confidence_raw),
        confidence_raw,
        constants: constants.clone(),
        complexity: complexity.map_or(0.0, |c| c.value),
        complexity_stderr: complexity.map_or(0.0, |c| c.stderr),
        loss: loss.cloned(),
        delta_grid: grid,
        function: head.name.clone(),
        function_index: worst,
        bound_raw: head.bound_raw,
        bound: head.bound,
        argmin_delta: head.argmin_delta,
        argmin_index: head.argmin_index,
        decomposition: decompositions.swap_remove(worst),
        per_function,
        extras: serde_json::Map::new(),
        caveats: Vec::new(),
    }
}

/// Empirical law `P_n` of a path, and optionally `pi` for reporting true risks.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub law: Vec<f64>,
    pub n: usize,
    pub pi: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(traj: &Trajectory, pi: Option<&[f64]>) -> Self {
        Sample {
            law: traj.empirical_law(),
            n: traj.len(),
            pi: pi.map(<[f64]>::to_vec),
        }
    }

    fn check(&self, class: &FunctionClass) -> Result<()> {
        class.check_states(self.law.len())
    }

    fn mass(&self, f: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
        f.iter().zip(&self.law).filter(|(v, _)| pred(**v)).map(|(_, w)| w).sum()
    }

    fn expect(&self, f: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        f.iter().zip(&self.law).map(|(v, w)| w * g(*v)).sum()
    }

    fn risk(&self, f: &[f64]) -> Option<f64> {
        self.pi
            .as_ref()
            .map(|pi| f.iter().zip(pi).filter(|(v, _)| **v <= 0.0).map(|(_, w)| w).sum())
    }
}

/// Complexity flavour of the margin bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    #[default]
    Rademacher,
    Gaussian,
}

/// `1 - (pi^2/3) e^{-2t^2}`.
pub fn thm1_confidence(t: f64) -> f64 {
    1.0 - PI * PI / 3.0 * (-2.0 * t * t).exp()
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::arg("t", "must be finite and >= 0"));
    }
    Ok(())
}

fn check_upper(phi: &MarginLoss) -> Result<()> {
    if !phi.is_upper() {
        return Err(Error::InvalidLoss("loss must be nonincreasing and dominate 1{x <= 0}".into()));
    }
    if !phi.lipschitz().is_finite() {
        return Err(Error::InvalidLoss("loss has an infinite Lipschitz constant".into()));
    }
    Ok(())
}

fn margin_rows(constants: &MarkovConstants, t: f64, grid: &[f64], complexity_at: impl Fn(f64) -> f64, capacity: f64, slack: f64) -> Vec<Row> {
    let rate = constants.rate();
    grid.iter()
        .map(|&d| Row {
            delta: Some(d),
            k: None,
            complexity: complexity_at(d),
            tail: t * rate,
            loglog: loglog(d).sqrt() * rate,
            capacity: capacity * rate,
            slack,
            b_n: constants.b_n,
        })
        .collect()
}

/// Margin bound on `P{f <= 0}` holding for all `f` with probability at least
/// `1 - (pi^2/3) e^{-2t^2}`.
///
/// Rademacher: `P_n phi(f/delta) + 8 L R_n / delta + (t + sqrt(log log_2(2/delta))) sqrt(tau/n) + B_n`.
/// Gaussian: complexity `2 sqrt(2 pi) L G_n / delta` plus `2/sqrt(n)`.
#[allow(clippy::too_many_arguments)]
pub fn bound_thm1(
    class: &FunctionClass,
    sample: &Sample,
    constants: &MarkovConstants,
    complexity: &ComplexityEstimate,
    phi: &MarginLoss,
    t: f64,
    grid: &[f64],
    flavor: Flavor,
) -> Result<BoundReport> {
    check_grid(grid)?;
    check_t(t)?;
    check_upper(phi)?;
    sample.check(class)?;
    let l = phi.lipschitz();
    let nf = constants.n as f64;
    let (coef, slack) = match flavor {
        Flavor::Rademacher => (8.0 * l, 0.0),
        Flavor::Gaussian => (2.0 * (2.0 * PI).sqrt() * l, 2.0 / nf.sqrt()),
    };
    let g = complexity.value;
    let rows = margin_rows(constants, t, grid, |d| coef / d * g, 0.0, slack);
    let assembled = assemble(
        class,
        &rows,
        |fi| sample.risk(class.function(fi)),
        |fi, ri| {
            let d = rows[ri].delta.unwrap();
            (sample.expect(class.function(fi), |v| phi.eval(v / d)), 0.0)
        },
    );
    let theorem = match flavor {
        Flavor::Rademacher => "thm1-rademacher",
        Flavor::Gaussian => "thm1-gaussian",
    };
    Ok(finish(
        theorem,
        "P{f <= 0}",
        t,
        thm1_confidence(t),
        constants,
        Some(complexity),
        Some(phi),
        grid.to_vec(),
        assembled,
    ))
}

/// Countable-family bound:
/// `inf_k [P_n phi_k(f) + 4 L(phi_k) R_n + (t + sqrt(log k)) sqrt(tau/n) + B_n]`.
pub fn bound_family(
    class: &FunctionClass,
    sample: &Sample,
    constants: &MarkovConstants,
    complexity: &ComplexityEstimate,
    phis: &[MarginLoss],
    t: f64,
) -> Result<BoundReport> {
    if phis.is_empty() {
        return Err(Error::InvalidLoss("family is empty".into()));
    }
    check_t(t)?;
    for phi in phis {
        check_upper(phi)?;
    }
    sample.check(class)?;
    let rate = constants.rate();
    let rows: Vec<Row> = phis
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            let k = i + 1;
            Row {
                delta: None,
                k: Some(k),
                complexity: 4.0 * phi.lipschitz() * complexity.value,
                tail: t * rate,
                loglog: (k as f64).ln().sqrt() * rate,
                capacity: 0.0,
                slack: 0.0,
                b_n: constants.b_n,
            }
        })
        .collect();
    let assembled = assemble(
        class,
        &rows,
        |fi| sample.risk(class.function(fi)),
        |fi, ri| (sample.expect(class.function(fi), |v| phis[ri].eval(v)), 0.0),
    );
    Ok(finish(
        "family",
        "P{f <= 0}",
        t,
        thm1_confidence(t),
        constants,
        Some(complexity),
        None,
        Vec::new(),
        assembled,
    ))
}

/// Dyadic ramp family `phi_k(x) = ramp(2^k x)`, `k = 1..=levels`.
pub fn dyadic_ramp_family(levels: usize) -> Vec<MarginLoss> {
    (1..=levels)
        .map(|k| MarginLoss::ramp_upper().scaled(2f64.powi(k as i32)))
        .collect()
}

/// Two-sided bound on `|P_n{f <= 0} - P{f <= 0}|`:
/// `inf_delta [P_n{|f| <= delta} + Delta_n(delta) + t sqrt(tau/n)]` with
/// `Delta_n = 8 R_n / delta + sqrt(tau log log_2(2/delta) / n) + B_n`.
pub fn bound_two_sided(
    class: &FunctionClass,
    sample: &Sample,
    constants: &MarkovConstants,
    complexity: &ComplexityEstimate,
    t: f64,
    grid: &[f64],
) -> Result<BoundReport> {
    check_grid(grid)?;
    check_t(t)?;
    sample.check(class)?;
    let nf = constants.n as f64;
    let rows: Vec<Row> = grid
        .iter()
        .map(|&d| Row {
            delta: Some(d),
            k: None,
            complexity: 8.0 / d * complexity.value,
            tail: t * constants.rate(),
            loglog: (constants.tau_min * loglog(d) / nf).sqrt(),
            capacity: 0.0,
            slack: 0.0,
            b_n: constants.b_n,
        })
        .collect();
    let assembled = assemble(
        class,
        &rows,
        |fi| {
            let f = class.function(fi);
            sample.risk(f).map(|p| (sample.mass(f, |v| v <= 0.0) - p).abs())
        },
        |fi, ri| {
            let d = rows[ri].delta.unwrap();
            (sample.mass(class.function(fi), |v| v.abs() <= d), 0.0)
        },
    );
    Ok(finish(
        "two-sided",
        "|P_n{f <= 0} - P{f <= 0}|",
        t,
        1.0 - 2.0 * PI * PI / 3.0 * (-2.0 * t * t).exp(),
        constants,
        Some(complexity),
        None,
        grid.to_vec(),
        assembled,
    ))
}

/// `t_alpha = sqrt((1/2) log(pi^2 / (3 alpha)))`.
pub fn pac_t_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg("alpha", "must lie in (0, 1)"));
    }
    Ok((0.5 * (PI * PI / (3.0 * alpha)).ln()).sqrt())
}

/// Voting-classifier bound with VC dimension `V(H)`:
/// `inf_delta [P_n{f <= delta} + 8 C sqrt(V/n) / delta + B_n + (t_alpha + sqrt(log log_2(2/delta))) sqrt(tau/n)]`
/// at confidence `1 - alpha`. `C` is an unspecified absolute constant.
pub fn bound_pac_vc(
    margins: &FunctionClass,
    sample: &Sample,
    constants: &MarkovConstants,
    v_h: usize,
    c: f64,
    alpha: f64,
    grid: &[f64],
) -> Result<BoundReport> {
    check_grid(grid)?;
    if v_h == 0 {
        return Err(Error::arg("V_H", "must be at least 1"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::arg("C", "must be > 0"));
    }
    let t_alpha = pac_t_alpha(alpha)?;
    sample.check(margins)?;
    let vc = (v_h as f64 / constants.n as f64).sqrt();
    let rows = margin_rows(constants, t_alpha, grid, |d| 8.0 * c / d * vc, 0.0, 0.0);
    let assembled = assemble(
        margins,
        &rows,
        |fi| sample.risk(margins.function(fi)),
        |fi, ri| {
            let d = rows[ri].delta.unwrap();
            (sample.mass(margins.function(fi), |v| v <= d), 0.0)
        },
    );
    let mut report = finish(
        "pac-vc",
        "P{f <= 0}",
        t_alpha,
        1.0 - alpha,
        constants,
        None,
        None,
        grid.to_vec(),
        assembled,
    );
    report.extras.insert("V_H".into(), v_h.into());
    report.extras.insert("C".into(), c.into());
    report.extras.insert("alpha".into(), alpha.into());
    report
        .caveats
        .push("C is an unspecified absolute constant supplied by the caller".into());
    Ok(report)
}

/// `prod_j (2 L_j b_j + 1)`.
pub fn layer_factor(lipschitz: &[f64], budgets: &[f64]) -> Result<f64> {
    if lipschitz.is_empty() || lipschitz.len() != budgets.len() {
        return Err(Error::DimensionMismatch {
            field: "budgets".into(),
            expected: lipschitz.len().max(1),
            found: budgets.len(),
        });
    }
    if lipschitz.iter().chain(budgets).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::arg("layers", "Lipschitz constants and budgets must be finite and >= 0"));
    }
    Ok(lipschitz.iter().zip(budgets).map(|(l, b)| 2.0 * l * b + 1.0).product())
}

/// Layered network bound with budgets `b_j`: the Gaussian margin bound with
/// complexity `(2 sqrt(2 pi) L(phi) / delta) prod_j (2 L_j b_j + 1) G_n(H)`.
#[allow(clippy::too_many_arguments)]
pub fn bound_deep_layered(
    margins: &FunctionClass,
    sample: &Sample,
    constants: &MarkovConstants,
    lipschitz: &[f64],
    budgets: &[f64],
    g_base: &ComplexityEstimate,
    phi: &MarginLoss,
    t: f64,
    grid: &[f64],
) -> Result<BoundReport> {
    let factor = layer_factor(lipschitz, budgets)?;
    let scaled = ComplexityEstimate {
        value: factor * g_base.value,
        stderr: factor * g_base.stderr,
        ..g_base.clone()
    };
    let mut report = bound_thm1(margins, sample, constants, &scaled, phi, t, grid, Flavor::Gaussian)?;
    report.theorem = "deep-layered".into();
    report.extras.insert("layer_factor".into(), factor.into());
    report.extras.insert("G_n_base".into(), g_base.value.into());
    Ok(report)
}

/// `zeta(alpha)` by a partial sum to 10^6 plus an Euler-Maclaurin tail;
/// `+inf` for `alpha <= 1`.
pub fn riemann_zeta(alpha: f64) -> f64 {
    if !(alpha > 1.0) {
        return f64::INFINITY;
    }
    let n = ZETA_TERMS as f64;
    // smallest terms first
    let mut s = 0.0;
    for k in (1..=ZETA_TERMS).rev() {
        s += (k as f64).powf(-alpha);
    }
    let tail = n.powf(1.0 - alpha) / (alpha - 1.0) - 0.5 * n.powf(-alpha) + alpha / 12.0 * n.powf(-alpha - 1.0);
    s + tail
}

/// Network capacity as consumed by [`bound_deep_adaptive`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveCapacity {
    pub lambda_f: f64,
    pub gamma_alpha: f64,
    pub alpha: f64,
}

/// Adaptive network bound:
/// `P_n phi(f/delta) + 2 sqrt(2 pi) L Lambda(f) G_n / delta + 2/sqrt(n)
///  + (t + Gamma_alpha(f) + sqrt(log log_2(2/delta))) sqrt(tau/n) + B_n`
/// at confidence `1 - (pi^2/3)(3 - 2 zeta(alpha))^{-1} e^{-2t^2}`.
#[allow(clippy::too_many_arguments)]
pub fn bound_deep_adaptive(
    margins: &FunctionClass,
    sample: &Sample,
    constants: &MarkovConstants,
    capacity: &AdaptiveCapacity,
    g_base: &ComplexityEstimate,
    phi: &MarginLoss,
    t: f64,
    grid: &[f64],
) -> Result<BoundReport> {
    let zeta = riemann_zeta(capacity.alpha);
    if !(zeta < 1.5) {
        return Err(Error::ZetaConstraint {
            alpha: capacity.alpha,
            zeta,
        });
    }
    check_grid(grid)?;
    check_t(t)?;
    check_upper(phi)?;
    sample.check(margins)?;
    let l = phi.lipschitz();
    let coef = 2.0 * (2.0 * PI).sqrt() * l * capacity.lambda_f * g_base.value;
    let slack = 2.0 / (constants.n as f64).sqrt();
    let rows = margin_rows(constants, t, grid, |d| coef / d, capacity.gamma_alpha, slack);
    let assembled = assemble(
        margins,
        &rows,
        |fi| sample.risk(margins.function(fi)),
        |fi, ri| {
            let d = rows[ri].delta.unwrap();
            (sample.expect(margins.function(fi), |v| phi.eval(v / d)), 0.0)
        },
    );
    let prefactor = 1.0 / (3.0 - 2.0 * zeta);
    let mut report = finish(
        "deep-adaptive",
        "P{f <= 0}",
        t,
        1.0 - PI * PI / 3.0 * prefactor * (-2.0 * t * t).exp(),
        constants,
        Some(g_base),
        Some(phi),
        grid.to_vec(),
        assembled,
    );
    report.extras.insert("Lambda".into(), capacity.lambda_f.into());
    report.extras.insert("Gamma_alpha".into(), capacity.gamma_alpha.into());
    report.extras.insert("alpha".into(), capacity.alpha.into());
    report.extras.insert("zeta".into(), zeta.into());
    report.extras.insert("tail_prefactor".into(), prefactor.into());
    Ok(report)
}

/// How the prior average in the Bayesian empirical term is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PriorAverage {
    Exact,
    /// Average over this many prior draws, with standard error.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Bayesian margin bound. `class` is tabulated on `(x, w)` pairs at index
/// `x |W| + w`; the empirical term is `(1/n) sum_i E_W phi(f(X_i, W)/delta)`.
/// `complexity` must be computed over `class` on the prior-product chain.
#[allow(clippy::too_many_arguments)]
pub fn bound_bayes(
    class: &FunctionClass,
    traj: &Trajectory,
    prior: &[f64],
    constants: &MarkovConstants,
    complexity: &ComplexityEstimate,
    phi: &MarginLoss,
    t: f64,
    grid: &[f64],
    flavor: Flavor,
    average: PriorAverage,
    lifted_pi: Option<&[f64]>,
) -> Result<BoundReport> {
    check_grid(grid)?;
    check_t(t)?;
    check_upper(phi)?;
    if prior.is_empty() || prior.iter().any(|p| !(*p >= 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidPrior("prior must be a probability vector".into()));
    }
    let k = prior.len();
    class.check_states(traj.n_states * k)?;
    let law = traj.empirical_law();
    let l = phi.lipschitz();
    let nf = constants.n as f64;
    let (coef, slack) = match flavor {
        Flavor::Rademacher => (8.0 * l, 0.0),
        Flavor::Gaussian => (2.0 * (2.0 * PI).sqrt() * l, 2.0 / nf.sqrt()),
    };
    let rows = margin_rows(constants, t, grid, |d| coef / d * complexity.value, 0.0, slack);
    let draws: Option<Vec<usize>> = match average {
        PriorAverage::Exact => None,
        PriorAverage::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::arg("w_samples", "need at least 2 prior draws"));
            }
            let cum: Vec<f64> = prior
                .iter()
                .scan(0.0, |a, p| {
                    *a += p;
                    Some(*a)
                })
                .collect();
            let mut rng = stream(seed, 0);
            Some(
                (0..samples)
                    .map(|_| {
                        let u = rng.random::<f64>() * cum[k - 1];
                        cum.partition_point(|&c| c <= u).min(k - 1)
                    })
                    .collect(),
            )
        }
    };
    let risk = |fi: usize| {
        lifted_pi.map(|pi| {
            class
                .function(fi)
                .iter()
                .zip(pi)
                .filter(|(v, _)| **v <= 0.0)
                .map(|(_, p)| p)
                .sum()
        })
    };
    let assembled = assemble(class, &rows, risk, |fi, ri| {
        let f = class.function(fi);
        let d = rows[ri].delta.unwrap();
        match &draws {
            None => {
                let v = law
                    .iter()
                    .enumerate()
                    .map(|(x, px)| px * prior.iter().enumerate().map(|(w, pw)| pw * phi.eval(f[x * k + w] / d)).sum::<f64>())
                    .sum();
                (v, 0.0)
            }
            Some(ws) => {
                let vals: Vec<f64> = ws
                    .iter()
                    .map(|&w| law.iter().enumerate().map(|(x, px)| px * phi.eval(f[x * k + w] / d)).sum())
                    .collect();
                let est = MeanEstimate::from_samples(&vals);
                (est.mean, est.stderr)
            }
        }
    });
    let theorem = match flavor {
        Flavor::Rademacher => "bayes-rademacher",
        Flavor::Gaussian => "bayes-gaussian",
    };
    let mut report = finish(
        theorem,
        "P^{f <= 0}",
        t,
        thm1_confidence(t),
        constants,
        Some(complexity),
        Some(phi),
        grid.to_vec(),
        assembled,
    );
    if let PriorAverage::MonteCarlo { samples, .. } = average {
        report.extras.insert("w_samples".into(), samples.into());
    }
    Ok(report)
}

/// Largest `delta in (0, 1)` with `delta^{gamma/2} F(delta) <= n^{-1/2 + gamma/4}`,
/// where `F(delta) = sum_x w(x) 1{f(x) <= delta}`, found exactly by walking
/// the constant pieces of `F`.
pub fn gamma_margin(f: &[f64], weights: &[f64], gamma: f64, n: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::arg("gamma", "must lie in (0, 1]"));
    }
    if n < 2 {
        return Err(Error::arg("n", "must be at least 2"));
    }
    if f.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            field: "weights".into(),
            expected: f.len(),
            found: weights.len(),
        });
    }
    let threshold = (n as f64).powf(-0.5 + gamma / 4.0);
    let mut jumps: Vec<f64> = f.iter().copied().filter(|v| *v > 0.0 && *v < 1.0).collect();
    jumps.sort_by(f64::total_cmp);
    jumps.dedup();
    let mass_at_most = |d: f64| -> f64 { f.iter().zip(weights).filter(|(v, _)| **v <= d).map(|(_, w)| w).sum() };
    let mut lo = 0.0;
    let mut p = mass_at_most(0.0);
    let mut best = 0.0f64;
    let mut edges = jumps.clone();
    edges.push(1.0);
    for (i, &hi) in edges.iter().enumerate() {
        // F == p on [lo, hi) (open at 0)
        let sup = if p <= 0.0 {
            hi
        } else {
            let cut = (threshold / p).powf(2.0 / gamma);
            if cut >= hi {
                hi
            } else if cut >= lo && (lo > 0.0 || cut > 0.0) {
                cut
            } else {
                f64::NEG_INFINITY
            }
        };
        best = best.max(sup);
        if i < jumps.len() {
            lo = hi;
            p = mass_at_most(hi);
        }
    }
    Ok(best.clamp(0.0, 1.0))
}

/// A right-continuous step CDF given by its jump points and values there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl StepCdf {
    /// From jump locations and the CDF value at each; must end at 1.
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != values.len() {
            return Err(Error::InvalidCdf("need matching nonempty jump and value lists".into()));
        }
        if xs.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCdf("non-finite entry".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCdf("jump points must increase strictly".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) || values[0] < 0.0 {
            return Err(Error::InvalidCdf("values must be nondecreasing and >= 0".into()));
        }
        if (values[values.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCdf(format!("CDF ends at {}, not 1", values[values.len() - 1])));
        }
        Ok(StepCdf { xs, values })
    }

    /// Law of `f(X)` with `X ~ weights`.
    pub fn from_masses(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidCdf("points and weights differ in length".into()));
        }
        let mut pairs: Vec<(f64, f64)> = points.iter().copied().zip(weights.iter().copied()).filter(|(_, w)| *w > 0.0).collect();
        if pairs.iter().any(|(_, w)| !w.is_finite()) {
            return Err(Error::InvalidCdf("non-finite weight".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCdf(format!("weights sum to {total}")));
        }
        let mut xs: Vec<f64> = Vec::new();
        let mut values = Vec::new();
        let mut acc = 0.0;
        for (x, w) in pairs {
            acc += w;
            if xs.last() == Some(&x) {
                *values.last_mut().unwrap() = acc;
            } else {
                xs.push(x);
                values.push(acc);
            }
        }
        *values.last_mut().unwrap() = 1.0;
        StepCdf::new(xs, values)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.xs.partition_point(|&x| x <= t);
        if i == 0 {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    /// Left limit `F(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let i = self.xs.partition_point(|&x| x < t);
        if i == 0 {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    pub fn jumps(&self) -> &[f64] {
        &self.xs
    }
}

/// `sup_t F(t) - G(t + delta)`: attained at a jump of `F` or just left of a
/// jump of `G` shifted by `-delta`.
fn one_sided_excess(f: &StepCdf, g: &StepCdf, delta: f64) -> f64 {
    let mut worst = 0.0f64;
    for &x in &f.xs {
        worst = worst.max(f.eval(x) - g.eval(x + delta));
    }
    for &y in &g.xs {
        worst = worst.max(f.eval_left(y - delta) - g.eval_left(y));
    }
    worst
}

fn levy_feasible(f: &StepCdf, g: &StepCdf, delta: f64) -> bool {
    one_sided_excess(f, g, delta) <= delta && one_sided_excess(g, f, delta) <= delta
}

/// Levy distance between two step CDFs, to about 1e-15 by bisection.
pub fn levy_distance(f: &StepCdf, g: &StepCdf) -> f64 {
    if levy_feasible(f, g, 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if levy_feasible(f, g, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn scalar_report(theorem: &str, target: &str, t: f64, confidence_raw: f64, constants: &MarkovConstants, row: DeltaTerms) -> BoundReport {
    let bound_raw = row.total;
    BoundReport {
        theorem: theorem.into(),
        target: target.into(),
        n: constants.n,
        t,
        confidence: clamp01(confidence_raw),
        confidence_raw,
        constants: constants.clone(),
        complexity: 0.0,
        complexity_stderr: 0.0,
        loss: None,
        delta_grid: Vec::new(),
        function: String::new(),
        function_index: 0,
        bound_raw,
        bound: clamp01(bound_raw),
        argmin_delta: None,
        argmin_index: 0,
        decomposition: vec![row],
        per_function: Vec::new(),
        extras: serde_json::Map::new(),
        caveats: Vec::new(),
    }
}

fn scalar_row(complexity: f64, tail: f64, b_n: f64) -> DeltaTerms {
    Row {
        delta: None,
        k: None,
        complexity,
        tail,
        loglog: 0.0,
        capacity: 0.0,
        slack: 0.0,
        b_n,
    }
    .with_empirical(0.0, 0.0)
}

/// `sup_f L(F_f, F_{n,f}) <= 4 sqrt(E||P_n^0||_F + M/sqrt(n)) + B_n + t sqrt(tau/n)`
/// with probability at least `1 - 2 e^{-2t^2}`.
pub fn bound_levy(constants: &MarkovConstants, expected_sup: f64, m: f64, t: f64) -> Result<BoundReport> {
    check_t(t)?;
    if !(expected_sup >= 0.0) || !(m > 0.0) {
        return Err(Error::arg("M", "E||P_n^0|| must be >= 0 and M > 0"));
    }
    let nf = constants.n as f64;
    let row = scalar_row(4.0 * (expected_sup + m / nf.sqrt()).sqrt(), t * constants.rate(), constants.b_n);
    let mut r = scalar_report("levy", "sup_f L(F_f, F_nf)", t, 1.0 - 2.0 * (-2.0 * t * t).exp(), constants, row);
    r.extras.insert("expected_sup".into(), expected_sup.into());
    r.extras.insert("M".into(), m.into());
    Ok(r)
}

/// `sup_f sup_y |P_n(f <= y) - P(f <= y)| <= sqrt(B_n) + t sqrt(tau/n)`
/// with probability at least `1 - 2 e^{-2t^2}`.
pub fn bound_sup_cdf(constants: &MarkovConstants, t: f64) -> Result<BoundReport> {
    check_t(t)?;
    let row = Row {
        delta: None,
        k: None,
        complexity: 0.0,
        tail: t * constants.rate(),
        loglog: 0.0,
        capacity: 0.0,
        slack: 0.0,
        b_n: constants.b_n.sqrt(),
    }
    .with_empirical(0.0, 0.0);
    Ok(scalar_report(
        "sup-cdf",
        "sup_f sup_y |P_n(f <= y) - P(f <= y)|",
        t,
        1.0 - 2.0 * (-2.0 * t * t).exp(),
        constants,
        row,
    ))
}
