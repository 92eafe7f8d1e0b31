//! First-order forms of higher-order processes: the companion lift of a linear
//! recursion, its affine variant, the ARMA(m, q) block lift with cumulative
//! noise coordinates, the product lift of a mixture of independent chains,
//! and a binned finite surrogate for Gaussian AR recursions.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::{ChainSpec, Sampler};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// `Sum a_i` this close to 1 has no affine offset.
pub const UNIT_ROOT_TOL: f64 = 1e-12;
/// Largest discretized state space.
pub const MAX_DISCRETE_STATES: usize = 4096;

/// `acc = 0; acc += a_i x_i` left to right. Both the direct and the lifted
/// simulators use this, so noise-free lifts agree exactly.
fn dot(a: impl IntoIterator<Item = f64>, x: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    for (p, q) in a.into_iter().zip(x) {
        acc += p * q;
    }
    acc
}

/// Row-major nested-array form of a matrix.
pub fn matrix_rows(g: &DMatrix<f64>) -> Vec<Vec<f64>> {
    g.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows<S: serde::Serializer>(g: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(g).serialize(s)
}

fn mat_vec(g: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (0..g.nrows()).map(|i| dot(g.row(i).iter().copied(), y.iter().copied())).collect()
}

/// Companion matrix of `a`: first row `a`, ones on the subdiagonal.
pub fn companion_matrix(a: &[f64]) -> DMatrix<f64> {
    let m = a.len();
    let mut g = DMatrix::zeros(m, m);
    for (j, &v) in a.iter().enumerate() {
        g[(0, j)] = v;
    }
    for i in 1..m {
        g[(i, i - 1)] = 1.0;
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompanionLift {
    pub order: usize,
    pub coefficients: Vec<f64>,
    #[serde(rename = "G", serialize_with = "rows")]
    pub g: DMatrix<f64>,
    /// Fixed point `u`; lifted coordinates are `X - u`.
    pub offset: f64,
}

/// Lift of `X_k = sum_i a_i X_{k-i}` to `Y_{k+1} = G Y_k` with
/// `Y_k = (X_{k+m-1}, ..., X_k)`.
pub fn companion_lift(a: &[f64]) -> Result<CompanionLift> {
    if a.is_empty() {
        return Err(Error::arg("a", "need at least one coefficient"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("a", "coefficients must be finite"));
    }
    Ok(CompanionLift {
        order: a.len(),
        coefficients: a.to_vec(),
        g: companion_matrix(a),
        offset: 0.0,
    })
}

fn fixed_point(a: &[f64], c: f64) -> Result<f64> {
    let s: f64 = a.iter().sum();
    if (1.0 - s).abs() <= UNIT_ROOT_TOL {
        return Err(Error::UnitRootOffset { sum: s });
    }
    Ok(c / (1.0 - s))
}

/// Lift of `X_k = c + sum_i a_i X_{k-i}`. With `u = c/(1 - sum a_i)` the
/// shifted process `X - u` is the homogeneous recursion, so `G` is the
/// companion matrix and `X = Y + u`.
pub fn affine_lift(a: &[f64], c: f64) -> Result<CompanionLift> {
    let mut lift = companion_lift(a)?;
    lift.offset = fixed_point(a, c)?;
    Ok(lift)
}

impl CompanionLift {
    /// Window `Y` for the most recent values `history = (X_k, X_{k-1}, ...)`.
    pub fn embed(&self, history: &[f64]) -> Vec<f64> {
        history.iter().take(self.order).map(|x| x - self.offset).collect()
    }

    pub fn step(&self, y: &[f64]) -> Vec<f64> {
        mat_vec(&self.g, y)
    }

    /// Observable `X` from the first lifted coordinate.
    pub fn observe(&self, y: &[f64]) -> f64 {
        y[0] + self.offset
    }
}

/// Direct recursion `X_k = c + sum_i a_i X_{k-i}` from `init = (X_0, X_{-1}, ...)`,
/// returning the next `steps` values.
pub fn simulate_linear(a: &[f64], c: f64, init: &[f64], steps: usize) -> Vec<f64> {
    let m = a.len();
    let mut hist: Vec<f64> = init[..m].to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = if c == 0.0 {
            dot(a.iter().copied(), hist.iter().copied())
        } else {
            c + dot(a.iter().copied(), hist.iter().copied())
        };
        hist.rotate_right(1);
        hist[0] = x;
        out.push(x);
    }
    out
}

/// The same path through the lift.
pub fn simulate_lifted(lift: &CompanionLift, init: &[f64], steps: usize) -> Vec<f64> {
    let mut y = lift.embed(init);
    (0..steps)
        .map(|_| {
            y = lift.step(&y);
            lift.observe(&y)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmaLift {
    pub c: f64,
    pub a: Vec<f64>,
    pub theta: Vec<f64>,
    /// Fixed point `u = c/(1 - sum a_i)`; the first `m` coordinates hold `X - u`.
    pub offset: f64,
    #[serde(rename = "G", serialize_with = "rows")]
    pub g: DMatrix<f64>,
    /// Coordinates receiving the innovation each step.
    pub noise_positions: [usize; 2],
}

/// Lift of `X_k = c + e_k + sum_i a_i X_{k-i} + sum_i theta_i e_{k-i}` to
/// `Y_{k+1} = G Y_k + e_{k+1} (1_0 + 1_m)` with
/// `Y_k = (X_k - u, ..., X_{k-m+1} - u, V_k, ..., V_{k-q})`, `V_k = sum_{i<=k} e_i`.
pub fn arma_lift(c: f64, a: &[f64], theta: &[f64]) -> Result<ArmaLift> {
    if a.is_empty() {
        return Err(Error::arg("a", "need at least one AR coefficient"));
    }
    if theta.is_empty() {
        return Err(Error::arg("theta", "need at least one MA coefficient"));
    }
    let offset = fixed_point(a, c)?;
    let (m, q) = (a.len(), theta.len());
    let d = m + q + 1;
    let mut g = DMatrix::zeros(d, d);
    g.view_mut((0, 0), (m, m)).copy_from(&companion_matrix(a));
    // theta_1 V_k + sum (theta_{i+1} - theta_i) V_{k-i} - theta_q V_{k-q}
    g[(0, m)] = theta[0];
    for i in 1..q {
        g[(0, m + i)] = theta[i] - theta[i - 1];
    }
    g[(0, m + q)] = -theta[q - 1];
    g[(m, m)] = 1.0;
    for i in 1..=q {
        g[(m + i, m + i - 1)] = 1.0;
    }
    Ok(ArmaLift {
        c,
        a: a.to_vec(),
        theta: theta.to_vec(),
        offset,
        g,
        noise_positions: [0, m],
    })
}

impl ArmaLift {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `G21` block (zero by construction).
    pub fn g21(&self) -> DMatrix<f64> {
        let m = self.a.len();
        self.g.view((m, 0), (self.theta.len() + 1, m)).into_owned()
    }

    /// `G22` block.
    pub fn g22(&self) -> DMatrix<f64> {
        let m = self.a.len();
        let k = self.theta.len() + 1;
        self.g.view((m, m), (k, k)).into_owned()
    }
}

/// Direct ARMA recursion from zero noise history and `init = (X_0, X_{-1}, ...)`,
/// consuming `noise[k]` as `e_{k+1}`.
pub fn simulate_arma(c: f64, a: &[f64], theta: &[f64], init: &[f64], noise: &[f64]) -> Vec<f64> {
    let m = a.len();
    let mut xs: Vec<f64> = init[..m].to_vec();
    let mut past_e = vec![0.0; theta.len()];
    let mut out = Vec::with_capacity(noise.len());
    for &e in noise {
        let x = c + e + dot(a.iter().copied(), xs.iter().copied()) + dot(theta.iter().copied(), past_e.iter().copied());
        xs.rotate_right(1);
        xs[0] = x;
        if !past_e.is_empty() {
            past_e.rotate_right(1);
            past_e[0] = e;
        }
        out.push(x);
    }
    out
}

/// The same path through the block lift.
pub fn simulate_arma_lifted(lift: &ArmaLift, init: &[f64], noise: &[f64]) -> Vec<f64> {
    let m = lift.a.len();
    let mut y = vec![0.0; lift.dim()];
    for i in 0..m {
        y[i] = init[i] - lift.offset;
    }
    let mut out = Vec::with_capacity(noise.len());
    for &e in noise {
        let mut next = mat_vec(&lift.g, &y);
        for &p in &lift.noise_positions {
            next[p] += e;
        }
        y = next;
        out.push(y[0] + lift.offset);
    }
    out
}

/// Largest absolute difference between two paths.
pub fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One innovation array consumed by both simulators.
pub fn gaussian_noise(rng: &mut StreamRng, sigma: f64, len: usize) -> Vec<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    (0..len).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A weighted sum of independent finite chains and its product lift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureLift {
    pub alphas: Vec<f64>,
    /// Upper-triangular `G` with `G[i][j] = alpha_j` for `j >= i`.
    #[serde(rename = "G", serialize_with = "rows")]
    pub g: DMatrix<f64>,
    pub det: f64,
    /// State counts of the components.
    pub sizes: Vec<usize>,
    /// Numeric value of each state, per component.
    pub values: Vec<Vec<f64>>,
    #[serde(skip)]
    pub components: Vec<ChainSpec>,
}

/// Build the mixture lift; `values[l]` gives the numeric value of each state
/// of component `l` (defaults to the state index).
pub fn mixture_lift(kernels: &[ChainSpec], alphas: &[f64], values: Option<&[Vec<f64>]>) -> Result<MixtureLift> {
    if kernels.is_empty() {
        return Err(Error::arg("kernels", "need at least one component"));
    }
    if kernels.len() != alphas.len() {
        return Err(Error::DimensionMismatch {
            field: "alphas".into(),
            expected: kernels.len(),
            found: alphas.len(),
        });
    }
    if let Some(i) = alphas.iter().position(|&a| a == 0.0) {
        return Err(Error::ZeroMixtureWeight { index: i });
    }
    let m = alphas.len();
    let g = DMatrix::from_fn(m, m, |i, j| if j >= i { alphas[j] } else { 0.0 });
    let det = g.determinant();
    let values: Vec<Vec<f64>> = match values {
        Some(v) => {
            for (l, (vals, k)) in v.iter().zip(kernels).enumerate() {
                if vals.len() != k.n_states() {
                    return Err(Error::DimensionMismatch {
                        field: format!("values[{l}]"),
                        expected: k.n_states(),
                        found: vals.len(),
                    });
                }
            }
            v.to_vec()
        }
        None => kernels.iter().map(|k| (0..k.n_states()).map(|i| i as f64).collect()).collect(),
    };
    Ok(MixtureLift {
        alphas: alphas.to_vec(),
        g,
        det,
        sizes: kernels.iter().map(ChainSpec::n_states).collect(),
        values,
        components: kernels.to_vec(),
    })
}

impl MixtureLift {
    /// Mixed-radix index of a tuple of component states (component 0 most significant).
    pub fn encode(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(&self.sizes).fold(0, |acc, (&x, &s)| acc * s + x)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for l in (0..self.sizes.len()).rev() {
            out[l] = index % self.sizes[l];
            index /= self.sizes[l];
        }
        out
    }

    fn state_values(&self, tuple: &[usize]) -> Vec<f64> {
        tuple.iter().enumerate().map(|(l, &x)| self.values[l][x]).collect()
    }

    /// `Z = G X` for a tuple of component states.
    pub fn z(&self, tuple: &[usize]) -> Vec<f64> {
        mat_vec(&self.g, &self.state_values(tuple))
    }

    /// Product chain on `S_1 x ... x S_m` with kernel `prod_l Q_l`.
    pub fn product_chain(&self) -> Result<ChainSpec> {
        let total: usize = self.sizes.iter().product();
        if total > MAX_DISCRETE_STATES {
            return Err(Error::arg("kernels", format!("product chain has {total} states")));
        }
        let mut q = DMatrix::zeros(total, total);
        let mut nu = DVector::zeros(total);
        let mut names = Vec::with_capacity(total);
        for i in 0..total {
            let xi = self.decode(i);
            names.push(format!("{xi:?}"));
            nu[i] = xi.iter().enumerate().map(|(l, &x)| self.components[l].nu()[x]).product();
            for j in 0..total {
                let yj = self.decode(j);
                q[(i, j)] = (0..xi.len()).map(|l| self.components[l].q()[(xi[l], yj[l])]).product();
            }
        }
        for i in 0..total {
            let s: f64 = q.row(i).iter().sum();
            for j in 0..total {
                q[(i, j)] /= s;
            }
        }
        ChainSpec::new(names, q, nu)
    }
}

/// Result of the mixture dual simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureCheck {
    pub steps: usize,
    pub direct_count: usize,
    pub lifted_count: usize,
}

/// Run every component on its own stream, count `f(Y_k) <= 0` directly from
/// `Y_k = sum_l alpha_l X_k^(l)` and through `f~(G X_k) = f((G X_k)_0)`.
pub fn mixture_indicator_check(lift: &MixtureLift, f: impl Fn(f64) -> bool, steps: usize, seed: u64) -> MixtureCheck {
    let samplers: Vec<Sampler> = lift.components.iter().map(Sampler::for_chain).collect();
    let paths: Vec<Vec<usize>> = samplers
        .iter()
        .enumerate()
        .map(|(l, s)| s.path(&mut crate::rng::stream(seed, l as u64), steps))
        .collect();
    let mut direct_count = 0;
    let mut lifted_count = 0;
    for k in 0..steps {
        let tuple: Vec<usize> = paths.iter().map(|p| p[k]).collect();
        let y = dot(lift.alphas.iter().copied(), lift.state_values(&tuple));
        if f(y) {
            direct_count += 1;
        }
        let product_state = lift.encode(&tuple);
        if f(lift.z(&lift.decode(product_state))[0]) {
            lifted_count += 1;
        }
    }
    MixtureCheck {
        steps,
        direct_count,
        lifted_count,
    }
}

/// `f~(x_k, ..., x_{k+m-1}) = f(x_k)` on `S^m`, first coordinate most significant.
pub fn lift_function(f: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::arg("window", "must be at least 1"));
    }
    let s = f.len();
    let total = s
        .checked_pow(window as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::arg("window", "lifted table is too large"))?;
    let block = total / s;
    Ok((0..total).map(|idx| f[idx / block]).collect())
}

/// Window index of `(x_i, ..., x_{i+m-1})` for each `i` with a full window.
pub fn window_indices(path: &[usize], n_states: usize, window: usize) -> Vec<usize> {
    if window == 0 || path.len() < window {
        return Vec::new();
    }
    path.windows(window)
        .map(|w| w.iter().fold(0, |acc, &x| acc * n_states + x))
        .collect()
}

/// Counts of `f <= 0` along the path and along its windows (same length).
pub fn window_counts(f: &[f64], path: &[usize], window: usize) -> Result<(usize, usize)> {
    let lifted = lift_function(f, window)?;
    let idx = window_indices(path, f.len(), window);
    let direct = path[..idx.len()].iter().filter(|&&x| f[x] <= 0.0).count();
    let through = idx.iter().filter(|&&i| lifted[i] <= 0.0).count();
    Ok((direct, through))
}

/// Binned finite surrogate of a Gaussian AR(m) recursion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discretization {
    pub bins: usize,
    pub range: [f64; 2],
    pub centres: Vec<f64>,
    #[serde(skip)]
    pub chain: ChainSpec,
    /// Max total variation between the first-coordinate transition law at
    /// `bins` and at `2 bins` (aggregated back), over all coarse states.
    pub tv_error: f64,
}

fn bin_masses(mean: f64, sigma: f64, edges: &[f64]) -> Vec<f64> {
    let normal = Normal::new(mean, sigma).expect("sigma > 0");
    let cdf: Vec<f64> = edges.iter().map(|&e| normal.cdf(e)).collect();
    let mut p: Vec<f64> = cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v /= s);
    } else {
        // all mass outside the range: send it to the nearest end
        let last = p.len() - 1;
        p.iter_mut().for_each(|v| *v = 0.0);
        if mean < edges[0] {
            p[0] = 1.0;
        } else {
            p[last] = 1.0;
        }
    }
    p
}

fn grid(range: [f64; 2], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (range[1] - range[0]) / bins as f64;
    let edges = (0..=bins).map(|i| range[0] + i as f64 * h).collect();
    let centres = (0..bins).map(|i| range[0] + (i as f64 + 0.5) * h).collect();
    (edges, centres)
}

/// Discretize `X_k = c + sum_i a_i X_{k-i} + sigma e_k` on `bins` uniform
/// cells of `range` per lag; lifted states are windows of cell indices.
pub fn discretize_ar(c: f64, a: &[f64], sigma: f64, range: [f64; 2], bins: usize) -> Result<Discretization> {
    if a.is_empty() {
        return Err(Error::arg("a", "need at least one coefficient"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::arg("sigma", "must be > 0"));
    }
    if !(range[0] < range[1]) || !range.iter().all(|v| v.is_finite()) {
        return Err(Error::arg("range", "need finite lo < hi"));
    }
    if bins < 2 {
        return Err(Error::arg("bins", "need at least 2 bins"));
    }
    let m = a.len();
    let total = bins
        .checked_pow(m as u32)
        .filter(|&t| t <= MAX_DISCRETE_STATES)
        .ok_or_else(|| Error::arg("bins", format!("bins^order exceeds {MAX_DISCRETE_STATES} states")))?;
    let (edges, centres) = grid(range, bins);
    let decode = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; m];
        for l in (0..m).rev() {
            out[l] = idx % bins;
            idx /= bins;
        }
        out
    };
    let encode = |t: &[usize]| t.iter().fold(0, |acc, &x| acc * bins + x);
    let mut q = DMatrix::zeros(total, total);
    let mut tv_error = 0.0f64;
    let (fine_edges, _) = grid(range, 2 * bins);
    let h = (range[1] - range[0]) / bins as f64;
    for s in 0..total {
        let cells = decode(s);
        let xs: Vec<f64> = cells.iter().map(|&i| centres[i]).collect();
        let mean = c + dot(a.iter().copied(), xs.iter().copied());
        let p = bin_masses(mean, sigma, &edges);
        for (j, &pj) in p.iter().enumerate() {
            let mut next = vec![j];
            next.extend_from_slice(&cells[..m - 1]);
            q[(s, encode(&next))] += pj;
        }
        // refine: average over the 2^m child cell centres, aggregate to coarse bins
        let mut agg = vec![0.0; bins];
        let children = 1usize << m;
        for mask in 0..children {
            let xc: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(l, x)| if mask >> l & 1 == 1 { x + h / 4.0 } else { x - h / 4.0 })
                .collect();
            let pf = bin_masses(c + dot(a.iter().copied(), xc), sigma, &fine_edges);
            for (jf, v) in pf.iter().enumerate() {
                agg[jf / 2] += v / children as f64;
            }
        }
        let tv = 0.5 * p.iter().zip(&agg).map(|(x, y)| (x - y).abs()).sum::<f64>();
        tv_error = tv_error.max(tv);
    }
    let names = (0..total).map(|s| format!("{:?}", decode(s))).collect();
    let mut nu = DVector::zeros(total);
    nu.fill(1.0 / total as f64);
    Ok(Discretization {
        bins,
        range,
        centres,
        chain: ChainSpec::new(names, q, nu)?,
        tv_error,
    })
}
