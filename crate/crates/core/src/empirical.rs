//! Finite function classes over chain states, empirical measures and the
//! complexity functionals `R_n` and `G_n`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, Sampler, Start, StationaryResult, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{replicate, MeanEstimate, StreamRng};

/// Tolerance on `max |f| <= M`.
pub const BOUND_TOL: f64 = 1e-12;
/// Exact enumeration refuses more than this many weighted terms.
pub const EXACT_CAP: f64 = (1u64 << 24) as f64;
/// Largest class for which the minimal cover is found exhaustively.
pub const EXACT_COVER_MAX: usize = 12;

/// Finitely many bounded functions tabulated on the states of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionClass {
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    m: f64,
    labeled: bool,
}

impl FunctionClass {
    pub fn new(names: Vec<String>, values: Vec<Vec<f64>>, m: f64, labeled: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("functions", "class is empty"));
        }
        if names.len() != values.len() {
            return Err(Error::DimensionMismatch {
                field: "names".into(),
                expected: values.len(),
                found: names.len(),
            });
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::arg("M", "must be finite and >= 0"));
        }
        let width = values[0].len();
        if width == 0 {
            return Err(Error::arg("functions", "functions have no values"));
        }
        for (k, row) in values.iter().enumerate() {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    field: format!("functions[{k}].values"),
                    expected: width,
                    found: row.len(),
                });
            }
            for (x, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Parse {
                        field: format!("functions[{k}].values[{x}]"),
                        message: "non-finite value".into(),
                    });
                }
                if v.abs() > m + BOUND_TOL {
                    return Err(Error::arg(
                        format!("functions[{k}].values[{x}]"),
                        format!("|{v}| exceeds M = {m}"),
                    ));
                }
            }
        }
        Ok(FunctionClass {
            names,
            values,
            m,
            labeled,
        })
    }

    /// Unnamed functions (`f0`, `f1`, ...) with `M = max |f|`.
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        let m = values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let names = (0..values.len()).map(|k| format!("f{k}")).collect();
        FunctionClass::new(names, values, m, false)
    }

    pub fn with_bound(values: Vec<Vec<f64>>, m: f64) -> Result<Self> {
        let names = (0..values.len()).map(|k| format!("f{k}")).collect();
        FunctionClass::new(names, values, m, false)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.values[0].len()
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn labeled(&self) -> bool {
        self.labeled
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn function(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn check_states(&self, n_states: usize) -> Result<()> {
        if self.n_states() == n_states {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                field: "functions.values".into(),
                expected: n_states,
                found: self.n_states(),
            })
        }
    }

    /// Same functions, restricted to `keep` (in that order).
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        FunctionClass::new(
            keep.iter().map(|&k| self.names[k].clone()).collect(),
            keep.iter().map(|&k| self.values[k].clone()).collect(),
            self.m,
            self.labeled,
        )
    }

    /// The class with every function negated appended.
    pub fn symmetrized(&self) -> Self {
        let mut names = self.names.clone();
        let mut values = self.values.clone();
        for (n, v) in self.names.iter().zip(&self.values) {
            names.push(format!("-{n}"));
            values.push(v.iter().map(|x| -x).collect());
        }
        FunctionClass {
            names,
            values,
            m: self.m,
            labeled: self.labeled,
        }
    }

    /// `max_f |sum_x f(x) w(x)|`.
    pub fn sup_abs(&self, w: &[f64]) -> f64 {
        self.values
            .iter()
            .map(|f| f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// `sum_x f(x) w(x)` for each `f`.
    pub fn integrate(&self, w: &[f64]) -> Vec<f64> {
        self.values
            .iter()
            .map(|f| f.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionEntry {
    pub name: String,
    pub values: Vec<f64>,
}

/// On-disk function-class document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFile {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default)]
    pub labeled: bool,
    pub functions: Vec<FunctionEntry>,
}

impl ClassFile {
    pub fn into_class(self) -> Result<FunctionClass> {
        let (names, values) = self.functions.into_iter().map(|e| (e.name, e.values)).unzip();
        FunctionClass::new(names, values, self.m, self.labeled)
    }

    pub fn from_class(class: &FunctionClass) -> Self {
        ClassFile {
            m: class.m,
            labeled: class.labeled,
            functions: class
                .names
                .iter()
                .zip(&class.values)
                .map(|(name, values)| FunctionEntry {
                    name: name.clone(),
                    values: values.clone(),
                })
                .collect(),
        }
    }
}

/// Parse a function-class document.
pub fn load_class_json(text: &str) -> Result<FunctionClass> {
    let file: ClassFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        field: "class".into(),
        message: e.to_string(),
    })?;
    file.into_class()
}

/// `Pf = sum_x pi(x) f(x)`.
pub fn true_mean(class: &FunctionClass, pi: &StationaryResult) -> Result<Vec<f64>> {
    class.check_states(pi.pi.len())?;
    Ok(class.integrate(&pi.pi))
}

/// `P_n f = n^{-1} sum_i f(X_i)`.
pub fn empirical_mean(class: &FunctionClass, traj: &Trajectory) -> Result<Vec<f64>> {
    class.check_states(traj.n_states)?;
    Ok(class.integrate(&traj.empirical_law()))
}

/// `||P_n - P||_F = max_f |P_n f - P f|`.
pub fn sup_deviation(class: &FunctionClass, traj: &Trajectory, pi: &StationaryResult) -> Result<f64> {
    class.check_states(traj.n_states)?;
    class.check_states(pi.pi.len())?;
    let diff: Vec<f64> = traj.empirical_law().iter().zip(&pi.pi).map(|(a, b)| a - b).collect();
    Ok(class.sup_abs(&diff))
}

/// Squared-mean pseudometric `d_{P_n,2}(f, g)`.
pub fn pn_distance(f: &[f64], g: &[f64], law: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(law)
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexityKind {
    Rademacher,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMethod {
    MonteCarlo,
    ExactEnumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityEstimate {
    pub kind: ComplexityKind,
    pub value: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub n: usize,
    pub method: EstimationMethod,
}

/// The chain with its initial law replaced according to `start`.
pub fn chain_for_start(spec: &ChainSpec, start: Start, pi: &StationaryResult) -> Result<ChainSpec> {
    match start {
        Start::Initial => Ok(spec.clone()),
        Start::Stationary => spec.with_initial(&pi.pi),
    }
}

/// Per-state sums of multipliers along one fresh path, scaled by `1/n`.
fn signed_law(sampler: &Sampler, rng: &mut StreamRng, n: usize, n_states: usize, kind: ComplexityKind, path: &mut [usize]) -> Vec<f64> {
    sampler.fill(rng, path);
    let mut w = vec![0.0; n_states];
    for &x in path.iter() {
        let e = match kind {
            ComplexityKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ComplexityKind::Gaussian => rng.sample::<f64, _>(StandardNormal),
        };
        w[x] += e;
    }
    let inv = 1.0 / n as f64;
    for v in &mut w {
        *v *= inv;
    }
    w
}

fn monte_carlo(class: &FunctionClass, chain: &ChainSpec, n: usize, replicas: usize, seed: u64, kind: ComplexityKind) -> Result<ComplexityEstimate> {
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    if replicas < 2 {
        return Err(Error::arg("replicas", "need at least 2 replicas for a standard error"));
    }
    class.check_states(chain.n_states())?;
    let sampler = Sampler::for_chain(chain);
    let s = chain.n_states();
    let samples = replicate(seed, replicas, |rng, _| {
        let mut path = vec![0; n];
        class.sup_abs(&signed_law(&sampler, rng, n, s, kind, &mut path))
    });
    let est = MeanEstimate::from_samples(&samples);
    Ok(ComplexityEstimate {
        kind,
        value: est.mean,
        stderr: est.stderr,
        replicas,
        n,
        method: EstimationMethod::MonteCarlo,
    })
}

/// Cost of enumerating all `(path, signs)` pairs.
pub fn exact_cost(n_states: usize, n: usize) -> f64 {
    (2.0 * n_states as f64).powi(n as i32)
}

/// Depth-first walk over every path of length `n` with its probability.
/// `visit` receives the path and its weight; paths of zero weight are pruned.
pub fn for_each_path(chain: &ChainSpec, n: usize, mut visit: impl FnMut(&[usize], f64)) {
    fn go(chain: &ChainSpec, n: usize, path: &mut Vec<usize>, w: f64, visit: &mut dyn FnMut(&[usize], f64)) {
        if path.len() == n {
            visit(path, w);
            return;
        }
        let s = chain.n_states();
        for y in 0..s {
            let p = match path.last() {
                None => chain.nu()[y],
                Some(&x) => chain.q()[(x, y)],
            };
            if p == 0.0 {
                continue;
            }
            path.push(y);
            go(chain, n, path, w * p, visit);
            path.pop();
        }
    }
    let mut path = Vec::with_capacity(n);
    go(chain, n, &mut path, 1.0, &mut visit);
}

/// `E_eps sup_f |n^{-1} sum_i eps_i f(x_i)|` for a fixed path, by enumerating
/// all `2^n` sign patterns.
pub fn exact_sign_average(class: &FunctionClass, path: &[usize]) -> f64 {
    let n = path.len();
    let k = class.len();
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    // Gray-code walk: one coordinate flips per step
    let mut signs = vec![1.0f64; n];
    for (f, s) in class.values.iter().zip(sums.iter_mut()) {
        *s = path.iter().map(|&x| f[x]).sum();
    }
    let sup = |sums: &[f64]| sums.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    total += sup(&sums);
    let patterns = 1u64 << n;
    for g in 1..patterns {
        let i = g.trailing_zeros() as usize;
        signs[i] = -signs[i];
        let x = path[i];
        for (f, s) in class.values.iter().zip(sums.iter_mut()) {
            *s += 2.0 * signs[i] * f[x];
        }
        total += sup(&sums);
    }
    total / patterns as f64 / n as f64
}

fn exact_rademacher(class: &FunctionClass, chain: &ChainSpec, n: usize) -> Result<ComplexityEstimate> {
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    class.check_states(chain.n_states())?;
    let cost = exact_cost(chain.n_states(), n);
    if cost > EXACT_CAP {
        return Err(Error::ExactTooLarge { cost, cap: EXACT_CAP });
    }
    let mut value = 0.0;
    for_each_path(chain, n, |path, w| value += w * exact_sign_average(class, path));
    Ok(ComplexityEstimate {
        kind: ComplexityKind::Rademacher,
        value,
        stderr: 0.0,
        replicas: 0,
        n,
        method: EstimationMethod::ExactEnumeration,
    })
}

/// `R_n(F) = E ||n^{-1} sum_i eps_i delta_{X_i}||_F` over the joint law of the
/// path (started from the chain's `nu`) and the signs.
pub fn rademacher_complexity(class: &FunctionClass, chain: &ChainSpec, n: usize, replicas: usize, seed: u64, exact: bool) -> Result<ComplexityEstimate> {
    if exact {
        exact_rademacher(class, chain, n)
    } else {
        monte_carlo(class, chain, n, replicas, seed, ComplexityKind::Rademacher)
    }
}

/// `G_n(F)` with standard normal multipliers, by Monte Carlo.
pub fn gaussian_complexity(class: &FunctionClass, chain: &ChainSpec, n: usize, replicas: usize, seed: u64) -> Result<ComplexityEstimate> {
    monte_carlo(class, chain, n, replicas, seed, ComplexityKind::Gaussian)
}

/// Rademacher average conditional on one observed path. Exact when
/// `2^n <= 2^24`, otherwise Monte Carlo over signs only.
pub fn empirical_rademacher(class: &FunctionClass, traj: &Trajectory, replicas: usize, seed: u64) -> Result<ComplexityEstimate> {
    class.check_states(traj.n_states)?;
    let n = traj.len();
    if n == 0 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    if (n as f64) <= EXACT_CAP.log2() {
        return Ok(ComplexityEstimate {
            kind: ComplexityKind::Rademacher,
            value: exact_sign_average(class, &traj.indices),
            stderr: 0.0,
            replicas: 0,
            n,
            method: EstimationMethod::ExactEnumeration,
        });
    }
    if replicas < 2 {
        return Err(Error::arg("replicas", "need at least 2 replicas for a standard error"));
    }
    let s = traj.n_states;
    let samples = replicate(seed, replicas, |rng, _| {
        let mut w = vec![0.0; s];
        for &x in &traj.indices {
            w[x] += if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        w.iter_mut().for_each(|v| *v /= n as f64);
        class.sup_abs(&w)
    });
    let est = MeanEstimate::from_samples(&samples);
    Ok(ComplexityEstimate {
        kind: ComplexityKind::Rademacher,
        value: est.mean,
        stderr: est.stderr,
        replicas,
        n,
        method: EstimationMethod::MonteCarlo,
    })
}

/// Margins `m_{f,y}(x) = f(x,y) - max_{y' != y} f(x,y')` over a class
/// tabulated on `(x, y)` pairs, index `x * n_labels + y`.
pub fn multiclass_margin(class: &FunctionClass, n_labels: usize) -> Result<FunctionClass> {
    if n_labels < 2 {
        return Err(Error::arg("labels", "need at least two labels"));
    }
    if class.n_states() % n_labels != 0 {
        return Err(Error::DimensionMismatch {
            field: "functions.values".into(),
            expected: (class.n_states() / n_labels + 1) * n_labels,
            found: class.n_states(),
        });
    }
    let states = class.n_states() / n_labels;
    let values = class
        .values
        .iter()
        .map(|f| {
            let mut out = vec![0.0; class.n_states()];
            for x in 0..states {
                let row = &f[x * n_labels..(x + 1) * n_labels];
                for y in 0..n_labels {
                    let rival = (0..n_labels)
                        .filter(|&z| z != y)
                        .map(|z| row[z])
                        .fold(f64::NEG_INFINITY, f64::max);
                    out[x * n_labels + y] = row[y] - rival;
                }
            }
            out
        })
        .collect();
    FunctionClass::new(class.names.clone(), values, 2.0 * class.m, true)
}

/// `f~(x, y) = y f(x)` for real label values (usually `-1, +1`), tabulated on
/// the lifted states `x * |Y| + y`.
pub fn binary_margin(class: &FunctionClass, label_values: &[f64]) -> Result<FunctionClass> {
    if label_values.is_empty() {
        return Err(Error::arg("labels", "no labels"));
    }
    let ymax = label_values.iter().fold(0.0f64, |a, y| a.max(y.abs()));
    let k = label_values.len();
    let values = class
        .values
        .iter()
        .map(|f| {
            let mut out = Vec::with_capacity(f.len() * k);
            for &v in f {
                for &y in label_values {
                    out.push(y * v);
                }
            }
            out
        })
        .collect();
    FunctionClass::new(class.names.clone(), values, class.m * ymax, true)
}

/// Per-state margin `y(x) f(x)` when each state carries one label value.
pub fn state_margin(class: &FunctionClass, labels: &[f64]) -> Result<FunctionClass> {
    class.check_states(labels.len())?;
    let ymax = labels.iter().fold(0.0f64, |a, y| a.max(y.abs()));
    let values = class
        .values
        .iter()
        .map(|f| f.iter().zip(labels).map(|(v, y)| v * y).collect())
        .collect();
    FunctionClass::new(class.names.clone(), values, class.m * ymax, class.labeled)
}

/// `f_M`: every value clamped to `[-M_cut, M_cut]`.
pub fn truncate_class(class: &FunctionClass, m_cut: f64) -> Result<FunctionClass> {
    if !(m_cut > 0.0) {
        return Err(Error::arg("M_cut", "must be > 0"));
    }
    let values = class
        .values
        .iter()
        .map(|f| f.iter().map(|v| v.clamp(-m_cut, m_cut)).collect())
        .collect();
    FunctionClass::new(class.names.clone(), values, class.m.min(m_cut), class.labeled)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringResult {
    pub radius: f64,
    /// Size of the greedy cover (indices of its centres below).
    pub greedy: usize,
    pub centres: Vec<usize>,
    /// Minimal cover size by exhaustive search, when the class is small enough.
    pub exact: Option<usize>,
    /// `ln N` using the smallest cover found.
    pub entropy: f64,
}

/// Covering number of the class in `d_{P_n,2}` with closed balls of radius `u`
/// centred at class members.
pub fn covering_number(class: &FunctionClass, traj: &Trajectory, u: f64) -> Result<CoveringResult> {
    if !(u > 0.0) {
        return Err(Error::arg("u", "radius must be > 0"));
    }
    class.check_states(traj.n_states)?;
    let law = traj.empirical_law();
    let k = class.len();
    let dist: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| pn_distance(&class.values[i], &class.values[j], &law)).collect())
        .collect();
    let mut centres: Vec<usize> = Vec::new();
    for i in 0..k {
        if !centres.iter().any(|&c| dist[c][i] <= u) {
            centres.push(i);
        }
    }
    let exact = (k <= EXACT_COVER_MAX).then(|| minimal_cover(&dist, u));
    let best = exact.unwrap_or(centres.len()).min(centres.len());
    Ok(CoveringResult {
        radius: u,
        greedy: centres.len(),
        centres,
        exact,
        entropy: (best as f64).ln(),
    })
}

fn minimal_cover(dist: &[Vec<f64>], u: f64) -> usize {
    let k = dist.len();
    let full = (1u32 << k) - 1;
    let reach: Vec<u32> = (0..k)
        .map(|c| (0..k).filter(|&j| dist[c][j] <= u).fold(0u32, |m, j| m | (1 << j)))
        .collect();
    let mut best = k;
    for mask in 1u32..=full {
        let size = mask.count_ones() as usize;
        if size >= best {
            continue;
        }
        let covered = (0..k)
            .filter(|&c| mask & (1 << c) != 0)
            .fold(0u32, |m, c| m | reach[c]);
        if covered == full {
            best = size;
        }
    }
    best
}
