//! Monte-Carlo and enumeration experiments checking each inequality on
//! concrete chains. Every check records both sides, the slack and a standard
//! error, so pass/fail can be recomputed from the report alone.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analysis::{AnalysisOptions, ChainAnalysis};
use crate::bounds::{
    bound_thm1, bound_two_sided, default_grid, symmetrization_terms, Flavor, MarginLoss, MarkovConstants, Sample,
    StepCdf,
};
use crate::chain::{ChainSpec, Sampler, Trajectory};
use crate::empirical::{
    exact_cost, for_each_path, gaussian_complexity, rademacher_complexity, ComplexityEstimate, EstimationMethod,
    FunctionClass, EXACT_CAP,
};
use crate::error::{Error, Result};
use crate::mixing::GuardMode;
use crate::rng::{derive_seed, replicate, stream, MeanEstimate};

/// Fewest replicas accepted by the Monte-Carlo targets.
pub const MIN_REPLICAS: usize = 100;
/// Standard errors of allowance before a one-sided check fails.
pub const Z_PASS: f64 = 3.0;
/// Tolerance of the exact replica identity.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Holds because the right side is trivial (negative lower bound, tail >= 1).
    VacuousPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `lhs <= rhs` up to `Z_PASS` standard errors.
    AtMost,
    /// `|lhs - rhs| <= tolerance`.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub relation: Relation,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    /// `rhs - lhs` for inequalities, `tolerance - |lhs - rhs|` for equalities.
    pub slack: f64,
    pub tolerance: f64,
    pub vacuous: bool,
    pub status: CheckStatus,
}

impl Check {
    pub fn at_most(label: impl Into<String>, lhs: f64, lhs_stderr: f64, rhs: f64, vacuous: bool) -> Self {
        let mut c = Check {
            label: label.into(),
            relation: Relation::AtMost,
            lhs,
            lhs_stderr,
            rhs,
            slack: rhs - lhs,
            tolerance: 0.0,
            vacuous,
            status: CheckStatus::Fail,
        };
        c.status = c.recompute_status();
        c
    }

    pub fn equal(label: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let mut c = Check {
            label: label.into(),
            relation: Relation::Equal,
            lhs,
            lhs_stderr: 0.0,
            rhs,
            slack: tolerance - (lhs - rhs).abs(),
            tolerance,
            vacuous: false,
            status: CheckStatus::Fail,
        };
        c.status = c.recompute_status();
        c
    }

    /// Status from the stored numbers only.
    pub fn recompute_status(&self) -> CheckStatus {
        let holds = match self.relation {
            // non-strict so an exact tie with zero stderr counts as holding
            Relation::AtMost => self.slack >= -Z_PASS * self.lhs_stderr,
            Relation::Equal => (self.lhs - self.rhs).abs() <= self.tolerance,
        };
        match (holds, self.vacuous) {
            (true, true) => CheckStatus::VacuousPass,
            (true, false) => CheckStatus::Pass,
            (false, _) => CheckStatus::Fail,
        }
    }

    /// Holds with the stricter margin `slack > z * stderr`.
    pub fn holds_with_margin(&self, z: f64) -> bool {
        self.slack > z * self.lhs_stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub target: String,
    pub replicas: usize,
    pub seed: u64,
    pub method: EstimationMethod,
    pub checks: Vec<Check>,
    pub diagnostics: Map<String, Value>,
    pub pass: bool,
}

impl VerifyReport {
    fn new(target: &str, replicas: usize, seed: u64, method: EstimationMethod, checks: Vec<Check>, diagnostics: Map<String, Value>) -> Self {
        let mut r = VerifyReport {
            target: target.into(),
            replicas,
            seed,
            method,
            checks,
            diagnostics,
            pass: false,
        };
        r.pass = r.recompute_pass();
        r
    }

    pub fn recompute_pass(&self) -> bool {
        self.checks.iter().all(|c| c.recompute_status() != CheckStatus::Fail)
    }

    pub fn check(&self, label: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.label == label)
    }
}

fn require_replicas(replicas: usize) -> Result<()> {
    if replicas < MIN_REPLICAS {
        return Err(Error::arg("replicas", format!("need at least {MIN_REPLICAS}")));
    }
    Ok(())
}

fn require_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    Ok(())
}

/// Mean and standard error of paired differences `a - b`.
fn paired(a: &[f64], b: &[f64], scale_b: f64) -> MeanEstimate {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - scale_b * y).collect();
    MeanEstimate::from_samples(&d)
}

fn mean_of(xs: &[f64]) -> MeanEstimate {
    MeanEstimate::from_samples(xs)
}

fn rademacher_sign(rng: &mut impl Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Per-replica `(||P_n - P||_F, ||P_n^0||_F)` along one path and one sign draw.
fn symmetrization_samples(class: &FunctionClass, chain: &ChainSpec, pi: &[f64], n: usize, replicas: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let sampler = Sampler::for_chain(chain);
    let s = chain.n_states();
    let pairs = replicate(seed, replicas, |rng, _| {
        let mut path = vec![0; n];
        sampler.fill(rng, &mut path);
        let inv = 1.0 / n as f64;
        let mut dev: Vec<f64> = pi.iter().map(|p| -p).collect();
        let mut signed = vec![0.0; s];
        for &x in &path {
            dev[x] += inv;
            signed[x] += rademacher_sign(rng) * inv;
        }
        (class.sup_abs(&dev), class.sup_abs(&signed))
    });
    pairs.into_iter().unzip()
}

/// Both sides of the symmetrization sandwich
/// `E||P_n^0||/2 - A~_n <= E||P_n - P|| <= 2 E||P_n^0|| + A_n`,
/// once from the chain's initial law and once from `pi`.
pub fn verify_symmetrization(chain: &ChainSpec, class: &FunctionClass, n: usize, replicas: usize, seed: u64, opts: AnalysisOptions) -> Result<VerifyReport> {
    require_n(n)?;
    require_replicas(replicas)?;
    class.check_states(chain.n_states())?;
    let analysis = ChainAnalysis::new(chain, opts)?;
    analysis.require_gap()?;
    let m = class.m();
    let mut checks = Vec::new();
    let mut diagnostics = Map::new();
    let starts = [("nu", chain.clone(), analysis.chi_div), ("pi", chain.with_initial(analysis.pi())?, 0.0)];
    for (idx, (name, start_chain, chi)) in starts.iter().enumerate() {
        let terms = symmetrization_terms(m, n, analysis.lambda, *chi, analysis.tau_min)?;
        let (dev, sym) = symmetrization_samples(class, start_chain, analysis.pi(), n, replicas, derive_seed(seed, idx as u64));
        let e_dev = mean_of(&dev);
        let e_sym = mean_of(&sym);
        let upper = paired(&dev, &sym, 2.0);
        checks.push(Check::at_most(
            format!("upper ({name} start)"),
            e_dev.mean,
            upper.stderr,
            2.0 * e_sym.mean + terms.a_n,
            false,
        ));
        let lower_value = 0.5 * e_sym.mean - terms.a_tilde_n;
        let lower = paired(&dev, &sym, 0.5);
        checks.push(Check::at_most(
            format!("lower ({name} start)"),
            lower_value,
            lower.stderr,
            e_dev.mean,
            lower_value <= 0.0,
        ));
        diagnostics.insert(
            format!("{name}_start"),
            json!({
                "E_dev": e_dev.mean,
                "E_dev_stderr": e_dev.stderr,
                "E_sym": e_sym.mean,
                "E_sym_stderr": e_sym.stderr,
                "terms": terms,
            }),
        );
    }
    diagnostics.insert("M".into(), m.into());
    diagnostics.insert("n".into(), n.into());
    diagnostics.insert("guard".into(), serde_json::to_value(opts.guard).unwrap_or(Value::Null));
    Ok(VerifyReport::new("symmetrization", replicas, seed, EstimationMethod::MonteCarlo, checks, diagnostics))
}

/// `E|S_{n,n0}(f) - E_pi f|^2 <= 2M/(n(1-lambda)) + 64 M^2 lambda^{n0} chi / (n^2 (1-lambda)^2)`
/// with `S_{n,n0} = n^{-1} sum_{j=1}^n f(X_{j+n0})`.
pub fn verify_variance(chain: &ChainSpec, f: &[f64], n: usize, n0: usize, replicas: usize, seed: u64, opts: AnalysisOptions) -> Result<VerifyReport> {
    require_n(n)?;
    require_replicas(replicas)?;
    if f.len() != chain.n_states() {
        return Err(Error::DimensionMismatch {
            field: "f".into(),
            expected: chain.n_states(),
            found: f.len(),
        });
    }
    let analysis = ChainAnalysis::new(chain, opts)?;
    analysis.require_gap()?;
    let m = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mean_pi: f64 = f.iter().zip(analysis.pi()).map(|(v, p)| v * p).sum();
    let sampler = Sampler::for_chain(chain);
    let sq = replicate(seed, replicas, |rng, _| {
        let mut path = vec![0; n + n0];
        sampler.fill(rng, &mut path);
        let s = path[n0..].iter().map(|&x| f[x]).sum::<f64>() / n as f64;
        (s - mean_pi) * (s - mean_pi)
    });
    let est = mean_of(&sq);
    let nf = n as f64;
    let gap = 1.0 - analysis.lambda;
    let first = 2.0 * m / (nf * gap);
    let second = 64.0 * m * m / (nf * nf * gap * gap) * analysis.lambda.powi(n0 as i32) * analysis.chi_div;
    let checks = vec![Check::at_most("variance", est.mean, est.stderr, first + second, false)];
    let mut diagnostics = Map::new();
    diagnostics.insert("M".into(), m.into());
    diagnostics.insert("mean_pi".into(), mean_pi.into());
    diagnostics.insert("lambda".into(), analysis.lambda.into());
    diagnostics.insert("chi_div".into(), analysis.chi_div.into());
    diagnostics.insert("n".into(), n.into());
    diagnostics.insert("n0".into(), n0.into());
    diagnostics.insert("rhs_leading".into(), first.into());
    diagnostics.insert("rhs_transient".into(), second.into());
    Ok(VerifyReport::new("variance", replicas, seed, EstimationMethod::MonteCarlo, checks, diagnostics))
}

/// Statistic of a whole path for the bounded-differences check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Statistic {
    /// `n^{-1} sum_i f(X_i)`.
    Mean { f: Vec<f64> },
    /// Ignores the path.
    Constant { value: f64 },
}

impl Statistic {
    pub fn eval(&self, path: &[usize]) -> f64 {
        match self {
            Statistic::Mean { f } => path.iter().map(|&x| f[x]).sum::<f64>() / path.len() as f64,
            Statistic::Constant { value } => *value,
        }
    }

    /// Tight Hamming coefficients.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Statistic::Mean { f } => {
                let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
                vec![(hi - lo) / n as f64; n]
            }
            Statistic::Constant { .. } => vec![0.0; n],
        }
    }

    /// `E f(X)` under the chain's initial law.
    pub fn expectation(&self, chain: &ChainSpec, n: usize) -> f64 {
        match self {
            Statistic::Mean { f } => {
                let mut law: Vec<f64> = chain.nu().iter().copied().collect();
                let mut total = 0.0;
                for i in 0..n {
                    total += law.iter().zip(f).map(|(p, v)| p * v).sum::<f64>();
                    if i + 1 < n {
                        law = step_law(chain, &law);
                    }
                }
                total / n as f64
            }
            Statistic::Constant { value } => *value,
        }
    }

    fn check_states(&self, n_states: usize) -> Result<()> {
        match self {
            Statistic::Mean { f } if f.len() != n_states => Err(Error::DimensionMismatch {
                field: "statistic.f".into(),
                expected: n_states,
                found: f.len(),
            }),
            _ => Ok(()),
        }
    }
}

fn step_law(chain: &ChainSpec, law: &[f64]) -> Vec<f64> {
    let s = chain.n_states();
    let q = chain.q();
    (0..s).map(|y| (0..s).map(|x| law[x] * q[(x, y)]).sum()).collect()
}

/// Lower end of the Wilson score interval for `k` successes in `r` trials.
pub fn wilson_lower(k: usize, r: usize, z: f64) -> f64 {
    if r == 0 {
        return 0.0;
    }
    let rf = r as f64;
    let p = k as f64 / rf;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * rf);
    let spread = z * (p * (1.0 - p) / rf + z2 / (4.0 * rf * rf)).sqrt();
    ((centre - spread) / (1.0 + z2 / rf)).max(0.0)
}

const SPOT_CHECKS: usize = 200;

/// Flip single coordinates of random paths and confirm `|f(x) - f(y)| <= c_i`.
fn spot_check(chain: &ChainSpec, stat: &Statistic, c: &[f64], seed: u64) -> Result<()> {
    let n = c.len();
    let s = chain.n_states();
    let sampler = Sampler::for_chain(chain);
    let mut rng = stream(derive_seed(seed, 0x5b07), 0);
    for _ in 0..SPOT_CHECKS {
        let mut path = sampler.path(&mut rng, n);
        let before = stat.eval(&path);
        let i = rng.random_range(0..n);
        path[i] = rng.random_range(0..s);
        let change = (stat.eval(&path) - before).abs();
        if change > c[i] * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::CoefficientBound {
                coordinate: i,
                change,
                coefficient: c[i],
            });
        }
    }
    Ok(())
}

/// Empirical tail `P(|f(X) - E f(X)| >= t)` against `2 exp(-2t^2 / (||c||^2 tau_min))`
/// for each `t`. The check passes while the Wilson lower end (z = 3) stays
/// below the bound.
#[allow(clippy::too_many_arguments)]
pub fn verify_mcdiarmid(
    chain: &ChainSpec,
    stat: &Statistic,
    coefficients: Option<&[f64]>,
    n: usize,
    t_grid: &[f64],
    replicas: usize,
    seed: u64,
    guard: GuardMode,
) -> Result<VerifyReport> {
    require_n(n)?;
    require_replicas(replicas)?;
    stat.check_states(chain.n_states())?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::arg("t_grid", "need finite t >= 0"));
    }
    let c: Vec<f64> = match coefficients {
        Some(c) if c.len() != n => {
            return Err(Error::DimensionMismatch {
                field: "c".into(),
                expected: n,
                found: c.len(),
            })
        }
        Some(c) => c.to_vec(),
        None => stat.coefficients(n),
    };
    spot_check(chain, stat, &c, seed)?;
    let analysis = ChainAnalysis::new(
        chain,
        AnalysisOptions {
            guard,
            ..AnalysisOptions::default()
        },
    )?;
    let tau = analysis.tau_min;
    let c2: f64 = c.iter().map(|v| v * v).sum();
    let mean = stat.expectation(chain, n);
    let sampler = Sampler::for_chain(chain);
    let devs = replicate(seed, replicas, |rng, _| {
        let path = sampler.path(rng, n);
        (stat.eval(&path) - mean).abs()
    });
    let mut checks = Vec::new();
    let mut degenerate = false;
    for &t in t_grid {
        let exponent = if t == 0.0 { 0.0 } else { -2.0 * t * t / (c2 * tau) };
        let rhs = 2.0 * exponent.exp();
        if t > 0.0 && tau == 0.0 {
            degenerate = true;
        }
        let k = devs.iter().filter(|&&d| d >= t - 1e-12).count();
        let p = k as f64 / replicas as f64;
        let stderr = (p - wilson_lower(k, replicas, Z_PASS)) / Z_PASS;
        checks.push(Check::at_most(format!("t = {t}"), p, stderr, rhs, rhs >= 1.0));
    }
    let mut diagnostics = Map::new();
    diagnostics.insert("tau_min".into(), tau.into());
    diagnostics.insert("guard".into(), serde_json::to_value(guard).unwrap_or(Value::Null));
    diagnostics.insert("c_norm_sq".into(), c2.into());
    diagnostics.insert("expectation".into(), mean.into());
    diagnostics.insert("spot_checks".into(), SPOT_CHECKS.into());
    if degenerate {
        diagnostics.insert(
            "warning".into(),
            "tau_min = 0 makes the bound 0 for every t > 0; failure is guaranteed".into(),
        );
    }
    Ok(VerifyReport::new("mcdiarmid", replicas, seed, EstimationMethod::MonteCarlo, checks, diagnostics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailTarget {
    Thm1Rademacher,
    Thm1Gaussian,
    TwoSided,
    DkwLemma,
    LevyLemma,
}

impl TailTarget {
    pub fn name(self) -> &'static str {
        match self {
            TailTarget::Thm1Rademacher => "thm1-rademacher",
            TailTarget::Thm1Gaussian => "thm1-gaussian",
            TailTarget::TwoSided => "two-sided",
            TailTarget::DkwLemma => "dkw-lemma",
            TailTarget::LevyLemma => "levy-lemma",
        }
    }

    /// Probability allowed for the violation event.
    pub fn tail(self, t: f64) -> f64 {
        let e = (-2.0 * t * t).exp();
        match self {
            TailTarget::Thm1Rademacher | TailTarget::Thm1Gaussian => PI * PI / 3.0 * e,
            TailTarget::TwoSided => 2.0 * PI * PI / 3.0 * e,
            TailTarget::DkwLemma | TailTarget::LevyLemma => 2.0 * e,
        }
    }
}

/// `sup_y |F_n(y) - F(y)|` for two laws of `f` on the same states.
fn sup_cdf_gap(f: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
    let mut gap = 0.0f64;
    let mut diff = 0.0;
    let mut i = 0;
    while i < order.len() {
        let v = f[order[i]];
        while i < order.len() && f[order[i]] == v {
            diff += p[order[i]] - q[order[i]];
            i += 1;
        }
        gap = gap.max(diff.abs());
    }
    gap
}

fn step_cdf(f: &[f64], law: &[f64]) -> Result<StepCdf> {
    StepCdf::from_masses(f, law)
}

/// Complexity shared by all replicas: exact when enumerable, otherwise Monte Carlo.
fn shared_complexity(target: TailTarget, class: &FunctionClass, chain: &ChainSpec, n: usize, replicas: usize, seed: u64) -> Result<ComplexityEstimate> {
    let seed = derive_seed(seed, 0xc0de);
    match target {
        TailTarget::Thm1Gaussian => gaussian_complexity(class, chain, n, replicas, seed),
        _ => {
            let exact = exact_cost(chain.n_states(), n) <= EXACT_CAP;
            rademacher_complexity(class, chain, n, replicas, seed, exact)
        }
    }
}

/// Frequency of the violation event (some `f` exceeds its bound) against the
/// theorem's tail probability, with binomial standard error at the tail rate.
#[allow(clippy::too_many_arguments)]
pub fn verify_theorem_tail(
    target: TailTarget,
    chain: &ChainSpec,
    class: &FunctionClass,
    n: usize,
    t: f64,
    replicas: usize,
    seed: u64,
    opts: AnalysisOptions,
) -> Result<VerifyReport> {
    require_n(n)?;
    require_replicas(replicas)?;
    class.check_states(chain.n_states())?;
    let analysis = ChainAnalysis::new(chain, opts)?;
    analysis.require_gap()?;
    let constants = MarkovConstants::from_analysis(&analysis, n)?;
    let pi = analysis.pi().to_vec();
    let needs_complexity = !matches!(target, TailTarget::DkwLemma);
    let complexity = if needs_complexity {
        Some(shared_complexity(target, class, chain, n, replicas, seed)?)
    } else {
        None
    };
    let grid = default_grid();
    let phi = MarginLoss::ramp_upper();
    let scalar_bound = match target {
        TailTarget::DkwLemma => Some(constants.b_n.sqrt() + t * constants.rate()),
        TailTarget::LevyLemma => {
            let c = complexity.as_ref().map_or(0.0, |c| c.value);
            Some(4.0 * (c + class.m() / (n as f64).sqrt()).sqrt() + constants.b_n + t * constants.rate())
        }
        _ => None,
    };
    let sampler = Sampler::for_chain(chain);
    let s = chain.n_states();
    let outcomes: Vec<Result<(bool, f64)>> = replicate(seed, replicas, |rng, _| {
        let path = sampler.path(rng, n);
        let traj = Trajectory {
            n_states: s,
            indices: path,
            seed,
        };
        let sample = Sample::new(&traj, Some(&pi));
        match target {
            TailTarget::Thm1Rademacher | TailTarget::Thm1Gaussian | TailTarget::TwoSided => {
                let cx = complexity.as_ref().expect("complexity");
                let report = match target {
                    TailTarget::TwoSided => bound_two_sided(class, &sample, &constants, cx, t, &grid)?,
                    TailTarget::Thm1Gaussian => bound_thm1(class, &sample, &constants, cx, &phi, t, &grid, Flavor::Gaussian)?,
                    _ => bound_thm1(class, &sample, &constants, cx, &phi, t, &grid, Flavor::Rademacher)?,
                };
                let mut worst = f64::NEG_INFINITY;
                let mut violated = false;
                for fb in &report.per_function {
                    let v = fb.true_value.unwrap_or(0.0);
                    worst = worst.max(v - fb.bound_raw);
                    violated |= v > fb.bound_raw;
                }
                Ok((violated, worst))
            }
            TailTarget::DkwLemma => {
                let sup = class
                    .values()
                    .iter()
                    .map(|f| sup_cdf_gap(f, &sample.law, &pi))
                    .fold(0.0, f64::max);
                let b = scalar_bound.unwrap();
                Ok((sup > b, sup - b))
            }
            TailTarget::LevyLemma => {
                let mut sup = 0.0f64;
                for f in class.values() {
                    let d = crate::bounds::levy_distance(&step_cdf(f, &pi)?, &step_cdf(f, &sample.law)?);
                    sup = sup.max(d);
                }
                let b = scalar_bound.unwrap();
                Ok((sup > b, sup - b))
            }
        }
    });
    let mut violations = 0usize;
    let mut closest = f64::NEG_INFINITY;
    for o in outcomes {
        let (v, gap) = o?;
        violations += v as usize;
        closest = closest.max(gap);
    }
    let tail_raw = target.tail(t);
    let tail = tail_raw.min(1.0);
    let freq = violations as f64 / replicas as f64;
    let stderr = (tail * (1.0 - tail) / replicas as f64).sqrt();
    let checks = vec![Check::at_most("violation frequency", freq, stderr, tail, tail_raw >= 1.0)];
    let mut diagnostics = Map::new();
    diagnostics.insert("t".into(), t.into());
    diagnostics.insert("n".into(), n.into());
    diagnostics.insert("tail_raw".into(), tail_raw.into());
    diagnostics.insert("violations".into(), violations.into());
    diagnostics.insert("max_excess".into(), closest.into());
    diagnostics.insert("constants".into(), serde_json::to_value(&constants).unwrap_or(Value::Null));
    if let Some(c) = &complexity {
        diagnostics.insert("complexity".into(), serde_json::to_value(c).unwrap_or(Value::Null));
    }
    if let Some(b) = scalar_bound {
        diagnostics.insert("bound".into(), b.into());
    }
    Ok(VerifyReport::new(target.name(), replicas, seed, EstimationMethod::MonteCarlo, checks, diagnostics))
}

/// Both sides of
/// `E_eps E_{X,Y} sup_f |sum_i eps_i (f(X_i) - f(Y_i))| = E_{X,Y} sup_f |sum_i (f(X_i) - f(Y_i))|`
/// for an independent replica `Y`, by full enumeration of paths and signs.
pub fn replica_identity_sides(chain: &ChainSpec, class: &FunctionClass, n: usize) -> Result<(f64, f64)> {
    require_n(n)?;
    class.check_states(chain.n_states())?;
    let s = chain.n_states() as f64;
    let cost = s.powi(2 * n as i32) * 2f64.powi(n as i32);
    if cost > EXACT_CAP {
        return Err(Error::ExactTooLarge { cost, cap: EXACT_CAP });
    }
    let mut paths = Vec::new();
    for_each_path(chain, n, |p, w| paths.push((p.to_vec(), w)));
    let k = class.len();
    let sup = |sums: &[f64]| sums.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let patterns = 1u64 << n;
    let mut diffs = vec![0.0; n * k];
    let mut sums = vec![0.0; k];
    for (x, wx) in &paths {
        for (y, wy) in &paths {
            let w = wx * wy;
            for (fi, f) in class.values().iter().enumerate() {
                for i in 0..n {
                    diffs[fi * n + i] = f[x[i]] - f[y[i]];
                }
                sums[fi] = diffs[fi * n..(fi + 1) * n].iter().sum();
            }
            rhs += w * sup(&sums);
            // Gray-code walk over sign patterns
            let mut signs = vec![1.0f64; n];
            let mut avg = sup(&sums);
            for g in 1..patterns {
                let i = g.trailing_zeros() as usize;
                signs[i] = -signs[i];
                for fi in 0..k {
                    sums[fi] += 2.0 * signs[i] * diffs[fi * n + i];
                }
                avg += sup(&sums);
            }
            lhs += w * avg / patterns as f64;
        }
    }
    Ok((lhs, rhs))
}

/// Exact check of the replica identity; `replicas` is recorded only.
pub fn verify_replica_identity(chain: &ChainSpec, class: &FunctionClass, n: usize, replicas: usize, seed: u64) -> Result<VerifyReport> {
    let (lhs, rhs) = replica_identity_sides(chain, class, n)?;
    let checks = vec![Check::equal("replica identity", lhs, rhs, IDENTITY_TOL)];
    let mut diagnostics = Map::new();
    diagnostics.insert("n".into(), n.into());
    diagnostics.insert("deviation".into(), (lhs - rhs).abs().into());
    diagnostics.insert("lhs_signed".into(), lhs.into());
    diagnostics.insert("rhs_unsigned".into(), rhs.into());
    Ok(VerifyReport::new(
        "replica-identity",
        replicas,
        seed,
        EstimationMethod::ExactEnumeration,
        checks,
        diagnostics,
    ))
}
