//! Finite-state Markov chains: representation, validation, stationary
//! analysis, trajectory sampling and the two product lifts (HMM labels and
//! Bayesian coefficient priors).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamRng};

/// Row sums and the initial law must be normalised to this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Transitions at or below this weight are treated as absent when deciding
/// connectivity.
pub const EDGE_TOL: f64 = 1e-15;
/// Detailed balance tolerance.
pub const REVERSIBLE_TOL: f64 = 1e-10;

/// A finite chain: ordered states, row-stochastic kernel `Q` and initial law `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    states: Vec<String>,
    q: DMatrix<f64>,
    nu: DVector<f64>,
}

/// One broken invariant of a candidate chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl ChainSpec {
    /// Build without validation. Use [`validate_chain`] to list problems.
    pub fn from_parts_unchecked(states: Vec<String>, q: DMatrix<f64>, nu: DVector<f64>) -> Self {
        ChainSpec { states, q, nu }
    }

    /// Build and validate.
    pub fn new(states: Vec<String>, q: DMatrix<f64>, nu: DVector<f64>) -> Result<Self> {
        let spec = ChainSpec { states, q, nu };
        let violations = validate_chain(&spec);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidChain(v.message.clone()));
        }
        Ok(spec)
    }

    /// Build from row slices with states named `0..n`.
    pub fn from_rows(rows: &[Vec<f64>], nu: &[f64]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidChain("Q is not square".into()));
        }
        let q = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let states = (0..n).map(|i| i.to_string()).collect();
        ChainSpec::new(states, q, DVector::from_column_slice(nu))
    }

    /// Chain whose every row equals `p` (i.i.d. sampling), started from `nu`.
    pub fn iid(p: &[f64], nu: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..p.len()).map(|_| p.to_vec()).collect();
        ChainSpec::from_rows(&rows, nu)
    }

    /// The symmetric two-state chain with flip probability `p`.
    pub fn two_state(p: f64, nu: [f64; 2]) -> Result<Self> {
        ChainSpec::from_rows(&[vec![1.0 - p, p], vec![p, 1.0 - p]], &nu)
    }

    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.nu
    }

    /// Same kernel, different initial law.
    pub fn with_initial(&self, nu: &[f64]) -> Result<Self> {
        ChainSpec::new(self.states.clone(), self.q.clone(), DVector::from_column_slice(nu))
    }

    /// Row `i` of the kernel as a vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.q.row(i).iter().copied().collect()
    }

    /// Index permutation: state `perm[i]` of the result is state `i` here.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_states();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                field: "perm".into(),
                expected: n,
                found: perm.len(),
            });
        }
        let mut q = DMatrix::zeros(n, n);
        let mut nu = DVector::zeros(n);
        let mut states = vec![String::new(); n];
        for i in 0..n {
            nu[perm[i]] = self.nu[i];
            states[perm[i]] = self.states[i].clone();
            for j in 0..n {
                q[(perm[i], perm[j])] = self.q[(i, j)];
            }
        }
        ChainSpec::new(states, q, nu)
    }
}

/// List every broken invariant; empty iff `spec` is a valid chain.
pub fn validate_chain(spec: &ChainSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let (rows, cols) = spec.q.shape();
    if rows == 0 {
        out.push(Violation {
            location: "Q".into(),
            message: "chain has no states".into(),
        });
        return out;
    }
    if rows != cols {
        out.push(Violation {
            location: "Q".into(),
            message: format!("Q is {rows}x{cols}, not square"),
        });
        return out;
    }
    if spec.nu.len() != rows {
        out.push(Violation {
            location: "nu".into(),
            message: format!("nu has length {}, expected {rows}", spec.nu.len()),
        });
    }
    if spec.states.len() != rows {
        out.push(Violation {
            location: "states".into(),
            message: format!("{} state names for {rows} states", spec.states.len()),
        });
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = spec.q[(i, j)];
            if !v.is_finite() {
                out.push(Violation {
                    location: format!("Q[{i}][{j}]"),
                    message: format!("Q[{i}][{j}] is not finite"),
                });
            } else if v < 0.0 {
                out.push(Violation {
                    location: format!("Q[{i}][{j}]"),
                    message: format!("Q[{i}][{j}] = {v} is negative"),
                });
            }
        }
        let sum: f64 = spec.q.row(i).iter().sum();
        if sum.is_finite() && (sum - 1.0).abs() > STOCHASTIC_TOL {
            out.push(Violation {
                location: format!("Q[{i}]"),
                message: format!("row {i} sums to {sum}"),
            });
        }
    }
    for (i, &v) in spec.nu.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation {
                location: format!("nu[{i}]"),
                message: format!("nu[{i}] is not finite"),
            });
        } else if v < 0.0 {
            out.push(Violation {
                location: format!("nu[{i}]"),
                message: format!("nu[{i}] = {v} is negative"),
            });
        }
    }
    let nu_sum: f64 = spec.nu.iter().sum();
    if nu_sum.is_finite() && (nu_sum - 1.0).abs() > STOCHASTIC_TOL {
        out.push(Violation {
            location: "nu".into(),
            message: format!("nu sums to {nu_sum}"),
        });
    }
    out
}

/// Stationary law and structural flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryResult {
    pub pi: Vec<f64>,
    pub pi_star: f64,
    pub irreducible: bool,
    pub reversible: bool,
    /// Period of the (unique) closed class; 1 means aperiodic.
    pub period: usize,
}

fn support_graph(q: &DMatrix<f64>) -> DiGraph<(), ()> {
    let n = q.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if q[(i, j)] > EDGE_TOL {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    g
}

/// Communicating classes with no edge leaving them.
fn closed_classes(q: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let g = support_graph(q);
    let sccs = tarjan_scc(&g);
    let mut class_of = vec![0usize; q.nrows()];
    for (c, comp) in sccs.iter().enumerate() {
        for v in comp {
            class_of[v.index()] = c;
        }
    }
    sccs.iter()
        .filter(|comp| {
            comp.iter().all(|v| {
                let i = v.index();
                (0..q.ncols()).all(|j| q[(i, j)] <= EDGE_TOL || class_of[j] == class_of[i])
            })
        })
        .map(|comp| {
            let mut c: Vec<usize> = comp.iter().map(|v| v.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of the class containing `members` (BFS level differences).
fn class_period(q: &DMatrix<f64>, members: &[usize]) -> usize {
    let n = q.nrows();
    let inside: Vec<bool> = (0..n).map(|i| members.contains(&i)).collect();
    let mut level = vec![usize::MAX; n];
    let start = members[0];
    level[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if !inside[v] || q[(u, v)] <= EDGE_TOL {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

/// Solve `pi Q = pi`, `sum pi = 1` by a direct dense solve.
pub fn stationary(spec: &ChainSpec) -> Result<StationaryResult> {
    let n = spec.n_states();
    let closed = closed_classes(&spec.q);
    if closed.len() != 1 {
        return Err(Error::NotIrreducible {
            closed_classes: closed.len(),
        });
    }
    let irreducible = closed[0].len() == n;
    let period = class_period(&spec.q, &closed[0]);

    // (Q^T - I) with the last equation replaced by the normalisation row.
    let mut a = spec.q.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solved = a.clone().lu().solve(&b);
    let mut pi = match solved {
        Some(x) if x.iter().all(|v| v.is_finite()) => x,
        _ => {
            // the replaced row can be the dependent one; fall back to least squares
            let mut aug = DMatrix::<f64>::zeros(n + 1, n);
            let qt = spec.q.transpose() - DMatrix::<f64>::identity(n, n);
            aug.view_mut((0, 0), (n, n)).copy_from(&qt);
            for j in 0..n {
                aug[(n, j)] = 1.0;
            }
            let mut rhs = DVector::<f64>::zeros(n + 1);
            rhs[n] = 1.0;
            aug.svd(true, true)
                .solve(&rhs, 1e-14)
                .map_err(|e| Error::Numerical(e.to_string()))?
        }
    };
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-13 {
            *v = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    pi /= s;
    // identical rows: the row itself is stationary, and taking it verbatim
    // keeps Q - 1 pi^T exactly zero
    if (1..n).all(|i| spec.q.row(i) == spec.q.row(0)) {
        pi = spec.q.row(0).transpose();
    }

    let pi_star = pi.iter().copied().fold(f64::INFINITY, f64::min);
    let reversible = (0..n).all(|x| {
        (0..n).all(|y| (pi[x] * spec.q[(x, y)] - pi[y] * spec.q[(y, x)]).abs() <= REVERSIBLE_TOL)
    });
    Ok(StationaryResult {
        pi: pi.iter().copied().collect(),
        pi_star,
        irreducible,
        reversible,
        period,
    })
}

/// Power iteration `nu Q^k` until successive iterates agree to `tol`.
/// Only meaningful for aperiodic chains; used as an independent check.
pub fn stationary_power(spec: &ChainSpec, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = spec.n_states();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..max_iter {
        let next = spec.q.tr_mul(&v);
        let diff = (&next - &v).amax();
        v = next;
        if diff < tol {
            break;
        }
    }
    v.iter().copied().collect()
}

/// A sampled path `X_1..X_n` as state indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n_states: usize,
    pub indices: Vec<usize>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Visit counts per state.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.n_states];
        for &i in &self.indices {
            c[i] += 1;
        }
        c
    }

    /// Empirical law `P_n` as a weight vector over states.
    pub fn empirical_law(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.counts().into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Where a sampled path starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// `X_1 ~ nu`.
    #[default]
    Initial,
    /// `X_1 ~ pi`.
    Stationary,
}

/// Cumulative transition tables for inverse-CDF sampling.
#[derive(Debug, Clone)]
pub struct Sampler {
    cum_rows: Vec<Vec<f64>>,
    cum_start: Vec<f64>,
}

fn cumulative(p: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    p.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

fn draw(cum: &[f64], rng: &mut StreamRng) -> usize {
    let total = *cum.last().unwrap();
    let u: f64 = rng.random::<f64>() * total;
    let idx = cum.partition_point(|&c| c <= u);
    if idx < cum.len() {
        return idx;
    }
    // u landed on the rounding slack above the last partial sum
    let last_positive = (0..cum.len())
        .rev()
        .find(|&i| cum[i] > if i == 0 { 0.0 } else { cum[i - 1] })
        .unwrap_or(cum.len() - 1);
    last_positive
}

impl Sampler {
    pub fn new(spec: &ChainSpec, start_law: &[f64]) -> Self {
        let n = spec.n_states();
        let cum_rows = (0..n).map(|i| cumulative(spec.q.row(i).iter().copied())).collect();
        Sampler {
            cum_rows,
            cum_start: cumulative(start_law.iter().copied()),
        }
    }

    pub fn for_chain(spec: &ChainSpec) -> Self {
        Sampler::new(spec, spec.nu.as_slice())
    }

    /// Fill `out` with a path of length `out.len()`.
    pub fn fill(&self, rng: &mut StreamRng, out: &mut [usize]) {
        if out.is_empty() {
            return;
        }
        let mut x = draw(&self.cum_start, rng);
        out[0] = x;
        for slot in out.iter_mut().skip(1) {
            x = draw(&self.cum_rows[x], rng);
            *slot = x;
        }
    }

    pub fn path(&self, rng: &mut StreamRng, n: usize) -> Vec<usize> {
        let mut v = vec![0; n];
        self.fill(rng, &mut v);
        v
    }
}

/// Sample `X_1 ~ nu`, `X_{k+1} ~ Q(X_k, .)`; a pure function of `(spec, n, seed)`.
pub fn sample_trajectory(spec: &ChainSpec, n: usize, seed: u64) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::arg("n", "trajectory length must be at least 1"));
    }
    let sampler = Sampler::for_chain(spec);
    let mut rng = stream(seed, 0);
    Ok(Trajectory {
        n_states: spec.n_states(),
        indices: sampler.path(&mut rng, n),
        seed,
    })
}

fn check_distribution_rows(rows: &DMatrix<f64>, what: &str) -> std::result::Result<(), String> {
    for i in 0..rows.nrows() {
        for j in 0..rows.ncols() {
            let v = rows[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{what}[{i}][{j}] = {v} is not a probability"));
            }
        }
        let s: f64 = rows.row(i).iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(format!("{what} row {i} sums to {s}"));
        }
    }
    Ok(())
}

/// Index of the lifted state `(x, y)` in a product over `|Y|` labels.
pub fn pair_index(x: usize, y: usize, n_labels: usize) -> usize {
    x * n_labels + y
}

/// Chain on `S x Y` with `Q~((x,y),(x',y')) = Q(x,x') g(x',y')` and
/// `nu~(x,y) = nu(x) g(x,y)`.
pub fn lift_hmm(spec: &ChainSpec, emission: &DMatrix<f64>, labels: Option<&[String]>) -> Result<ChainSpec> {
    let n = spec.n_states();
    if emission.nrows() != n {
        return Err(Error::InvalidEmission(format!(
            "emission has {} rows, chain has {n} states",
            emission.nrows()
        )));
    }
    let k = emission.ncols();
    if k == 0 {
        return Err(Error::InvalidEmission("no labels".into()));
    }
    check_distribution_rows(emission, "emission").map_err(Error::InvalidEmission)?;
    let label_names: Vec<String> = match labels {
        Some(l) if l.len() == k => l.to_vec(),
        Some(l) => {
            return Err(Error::InvalidEmission(format!(
                "{} label names for {k} emission columns",
                l.len()
            )))
        }
        None => (0..k).map(|i| i.to_string()).collect(),
    };
    let m = n * k;
    let mut q = DMatrix::zeros(m, m);
    let mut nu = DVector::zeros(m);
    let mut states = Vec::with_capacity(m);
    for x in 0..n {
        for y in 0..k {
            let from = pair_index(x, y, k);
            states.push(format!("({},{})", spec.states[x], label_names[y]));
            nu[from] = spec.nu[x] * emission[(x, y)];
            for x2 in 0..n {
                for y2 in 0..k {
                    q[(from, pair_index(x2, y2, k))] = spec.q[(x, x2)] * emission[(x2, y2)];
                }
            }
        }
    }
    renormalise_rows(&mut q);
    ChainSpec::new(states, q, nu)
}

/// Chain on `S x W` with `Q~((x,w),(x',w')) = Q(x,x') P_W(w')` and
/// `nu~(x,w) = nu(x) P_W(w)`.
pub fn lift_prior_product(spec: &ChainSpec, prior: &[f64]) -> Result<ChainSpec> {
    if prior.is_empty() {
        return Err(Error::InvalidPrior("prior is empty".into()));
    }
    if let Some((i, v)) = prior.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidPrior(format!("prior[{i}] = {v} is not a probability")));
    }
    let s: f64 = prior.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidPrior(format!("prior sums to {s}")));
    }
    let n = spec.n_states();
    let k = prior.len();
    let m = n * k;
    let mut q = DMatrix::zeros(m, m);
    let mut nu = DVector::zeros(m);
    let mut states = Vec::with_capacity(m);
    for x in 0..n {
        for w in 0..k {
            let from = pair_index(x, w, k);
            states.push(format!("({},w{})", spec.states[x], w));
            nu[from] = spec.nu[x] * prior[w];
            for x2 in 0..n {
                for w2 in 0..k {
                    q[(from, pair_index(x2, w2, k))] = spec.q[(x, x2)] * prior[w2];
                }
            }
        }
    }
    renormalise_rows(&mut q);
    ChainSpec::new(states, q, nu)
}

/// Products of normalised rows drift from 1 by a few ulps; pull them back.
fn renormalise_rows(q: &mut DMatrix<f64>) {
    for i in 0..q.nrows() {
        let s: f64 = q.row(i).iter().sum();
        if s > 0.0 && (s - 1.0).abs() <= 1e-9 {
            for j in 0..q.ncols() {
                q[(i, j)] /= s;
            }
        }
    }
}

/// Plug-in kernel estimate from one path.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimate {
    pub chain: ChainSpec,
    /// Rows with no outgoing transitions and no smoothing, set to uniform.
    pub unvisited_rows: Vec<usize>,
}

/// `Q^(x,y) = (count(x->y) + s) / (count(x->.) + |S| s)`, `nu^ = delta_{X_1}`.
pub fn estimate_kernel(traj: &Trajectory, smoothing: f64) -> Result<KernelEstimate> {
    if traj.len() < 2 {
        return Err(Error::arg("trajectory", "need at least two observations"));
    }
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::arg("smoothing", "must be a finite value >= 0"));
    }
    let n = traj.n_states;
    let mut counts = DMatrix::<f64>::zeros(n, n);
    for w in traj.indices.windows(2) {
        counts[(w[0], w[1])] += 1.0;
    }
    let mut q = DMatrix::zeros(n, n);
    let mut unvisited_rows = Vec::new();
    for x in 0..n {
        let total: f64 = counts.row(x).iter().sum();
        let denom = total + n as f64 * smoothing;
        if denom == 0.0 {
            unvisited_rows.push(x);
            for y in 0..n {
                q[(x, y)] = 1.0 / n as f64;
            }
        } else {
            for y in 0..n {
                q[(x, y)] = (counts[(x, y)] + smoothing) / denom;
            }
        }
    }
    let mut nu = DVector::zeros(n);
    nu[traj.indices[0]] = 1.0;
    let states = (0..n).map(|i| i.to_string()).collect();
    Ok(KernelEstimate {
        chain: ChainSpec::new(states, q, nu)?,
        unvisited_rows,
    })
}

/// On-disk chain document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub states: Vec<serde_json::Value>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<serde_json::Value>>,
}

/// A parsed chain document.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedChain {
    pub chain: ChainSpec,
    pub emission: Option<DMatrix<f64>>,
    pub labels: Option<Vec<String>>,
}

impl LoadedChain {
    /// The chain the labelled classes live on: the HMM lift when an
    /// emission matrix is present, the plain chain otherwise.
    pub fn labelled_chain(&self) -> Result<ChainSpec> {
        match &self.emission {
            Some(g) => lift_hmm(&self.chain, g, self.labels.as_deref()),
            None => Ok(self.chain.clone()),
        }
    }
}

fn value_name(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], field: &str, ncols: Option<usize>) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = ncols.unwrap_or_else(|| rows.first().map_or(0, Vec::len));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != nc {
            return Err(Error::Parse {
                field: format!("{field}[{i}]"),
                message: format!("row has {} entries, expected {nc}", r.len()),
            });
        }
        for (j, v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parse {
                    field: format!("{field}[{i}][{j}]"),
                    message: format!("non-finite value at row {i}, column {j}"),
                });
            }
        }
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

impl ChainFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            field: "chain".into(),
            message: e.to_string(),
        })
    }

    pub fn into_loaded(self) -> Result<LoadedChain> {
        let n = self.states.len();
        if self.q.len() != n {
            return Err(Error::Parse {
                field: "Q".into(),
                message: format!("{} rows for {n} states", self.q.len()),
            });
        }
        let q = matrix_from_rows(&self.q, "Q", Some(n))?;
        if self.nu.len() != n {
            return Err(Error::Parse {
                field: "nu".into(),
                message: format!("length {} for {n} states", self.nu.len()),
            });
        }
        if let Some(j) = self.nu.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                field: format!("nu[{j}]"),
                message: format!("non-finite value at column {j}"),
            });
        }
        let states = self.states.iter().map(value_name).collect();
        let chain = ChainSpec::from_parts_unchecked(states, q, DVector::from_vec(self.nu));
        if let Some(v) = validate_chain(&chain).into_iter().next() {
            return Err(Error::Parse {
                field: v.location,
                message: v.message,
            });
        }
        let emission = match self.emission {
            Some(rows) => {
                if rows.len() != n {
                    return Err(Error::Parse {
                        field: "emission".into(),
                        message: format!("{} rows for {n} states", rows.len()),
                    });
                }
                Some(matrix_from_rows(&rows, "emission", None)?)
            }
            None => None,
        };
        let labels = self.labels.map(|l| l.iter().map(value_name).collect::<Vec<_>>());
        if let (Some(g), Some(l)) = (&emission, &labels) {
            if g.ncols() != l.len() {
                return Err(Error::Parse {
                    field: "labels".into(),
                    message: format!("{} labels for {} emission columns", l.len(), g.ncols()),
                });
            }
        }
        Ok(LoadedChain {
            chain,
            emission,
            labels,
        })
    }

    pub fn from_chain(chain: &ChainSpec) -> Self {
        let n = chain.n_states();
        ChainFile {
            states: chain.states.iter().map(|s| serde_json::Value::String(s.clone())).collect(),
            q: (0..n).map(|i| chain.row(i)).collect(),
            nu: chain.nu.iter().copied().collect(),
            emission: None,
            labels: None,
        }
    }
}

/// Parse a chain document.
pub fn load_chain_json(text: &str) -> Result<LoadedChain> {
    ChainFile::from_json(text)?.into_loaded()
}
