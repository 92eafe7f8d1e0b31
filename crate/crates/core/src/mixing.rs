//! Total-variation mixing profile `d(t)`, the step function `t_mix(eps)`,
//! and `tau_min = inf_eps t_mix(eps) ((2 - eps)/(1 - eps))^2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, StationaryResult};
use crate::error::{Error, Result};

/// The auto horizon stops once `d(t)` falls below this.
pub const HORIZON_TARGET: f64 = 1e-6;
/// Horizon used when the absolute gap is zero and no horizon is given.
pub const DEGENERATE_HORIZON: usize = 1000;
/// Hard ceiling on any auto horizon.
pub const MAX_HORIZON: usize = 200_000;

/// Whether `t_mix(eps)` may be 0.
///
/// `Guarded` clamps `t_mix(eps) >= 1` (equivalently treats `d(0)` as 1), which
/// keeps `tau_min >= 4`. `Literal` keeps `d(0) = 1 - pi_*`, so `tau_min` is 0
/// whenever `pi_* > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardMode {
    #[default]
    Guarded,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingProfile {
    /// Raw `d(0..=horizon)`.
    pub d_raw: Vec<f64>,
    /// Running minimum of `d_raw`; all step-function queries use this.
    pub d_values: Vec<f64>,
    pub horizon: usize,
    /// `d(horizon) < 1e-6`.
    pub converged: bool,
}

/// `d(t) = max_x (1/2) sum_y |Q^t(x,y) - pi(y)|` for `t = 0..=horizon`.
pub fn tv_profile(spec: &ChainSpec, pi: &StationaryResult, horizon: usize) -> MixingProfile {
    let n = spec.n_states();
    let q = spec.q();
    let mut pt = DMatrix::<f64>::identity(n, n);
    let mut d_raw = Vec::with_capacity(horizon + 1);
    d_raw.push(tv_rows(&pt, &pi.pi));
    for _ in 0..horizon {
        pt = &pt * q;
        d_raw.push(tv_rows(&pt, &pi.pi));
    }
    MixingProfile::from_raw(d_raw)
}

fn tv_rows(pt: &DMatrix<f64>, pi: &[f64]) -> f64 {
    (0..pt.nrows())
        .map(|x| 0.5 * pi.iter().enumerate().map(|(y, p)| (pt[(x, y)] - p).abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

/// Default horizon: first `t` with `d(t) < 1e-6`, capped at
/// `10 |S| ceil(1/gamma*)` (or 1000 when `gamma* = 0`).
pub fn auto_profile(spec: &ChainSpec, pi: &StationaryResult, gamma_star: f64) -> MixingProfile {
    let n = spec.n_states();
    let cap = if gamma_star > 0.0 {
        let c = 10.0 * n as f64 * (1.0 / gamma_star).ceil();
        if c.is_finite() {
            (c as usize).min(MAX_HORIZON)
        } else {
            MAX_HORIZON
        }
    } else {
        DEGENERATE_HORIZON
    };
    let q = spec.q();
    let mut pt = DMatrix::<f64>::identity(n, n);
    let mut d_raw = vec![tv_rows(&pt, &pi.pi)];
    while d_raw.len() <= cap && *d_raw.last().unwrap() >= HORIZON_TARGET {
        pt = &pt * q;
        d_raw.push(tv_rows(&pt, &pi.pi));
    }
    MixingProfile::from_raw(d_raw)
}

fn tau_factor(eps: f64) -> f64 {
    let r = (2.0 - eps) / (1.0 - eps);
    r * r
}

impl MixingProfile {
    pub fn from_raw(d_raw: Vec<f64>) -> Self {
        let mut d_values = d_raw.clone();
        for i in 1..d_values.len() {
            if d_values[i] > d_values[i - 1] {
                d_values[i] = d_values[i - 1];
            }
        }
        let horizon = d_raw.len() - 1;
        let converged = d_values[horizon] < HORIZON_TARGET;
        MixingProfile {
            d_raw,
            d_values,
            horizon,
            converged,
        }
    }

    /// Smoothed `d(t)`.
    pub fn d(&self, t: usize) -> f64 {
        self.d_values[t]
    }

    /// Unguarded `min{t : d(t) <= eps}`, `None` if not reached by the horizon.
    fn first_below(&self, eps: f64) -> Option<usize> {
        // d_values is nonincreasing
        let idx = self.d_values.partition_point(|&d| d > eps);
        (idx <= self.horizon).then_some(idx)
    }

    /// `t_mix(eps)`; guarded mode returns at least 1.
    pub fn t_mix(&self, eps: f64, mode: GuardMode) -> Result<usize> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::arg("epsilon", "must lie in (0, 1)"));
        }
        match self.first_below(eps) {
            Some(t) => Ok(match mode {
                GuardMode::Guarded => t.max(1),
                GuardMode::Literal => t,
            }),
            None => Err(Error::Unresolved {
                horizon: self.horizon,
                epsilon: eps,
            }),
        }
    }

    /// `t_mix = t_mix(1/4)`.
    pub fn t_mix_quarter(&self, mode: GuardMode) -> Result<usize> {
        self.t_mix(0.25, mode)
    }

    /// Exact `tau_min` over the step function.
    ///
    /// On `[d(s), d(s-1))` the mixing time is constant while the factor
    /// increases in `eps`, so only the left endpoints `eps = d(s)` matter.
    pub fn tau_min(&self, mode: GuardMode) -> f64 {
        let start = match mode {
            GuardMode::Guarded => 1,
            GuardMode::Literal => 0,
        };
        let mut best = f64::INFINITY;
        for s in start..=self.horizon {
            let eps = self.d_values[s];
            if eps >= 1.0 {
                continue;
            }
            let t = self.first_below(eps).unwrap_or(s);
            let t = match mode {
                GuardMode::Guarded => t.max(1),
                GuardMode::Literal => t,
            };
            let v = t as f64 * tau_factor(eps);
            if v < best {
                best = v;
            }
        }
        best
    }

    /// True when no step beyond the horizon could lower `tau_min`: every such
    /// candidate is at least `4 (horizon + 1)`, or the profile already hit 0.
    pub fn tau_min_is_exact(&self, mode: GuardMode) -> bool {
        self.d_values[self.horizon] == 0.0 || self.tau_min(mode) <= 4.0 * (self.horizon + 1) as f64
    }
}

/// `(1/gamma* - 1) log 2 <= t_mix <= log(4/pi_*)/gamma*`.
pub fn gap_mixing_bracket(gamma_star: f64, pi_star: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&gamma_star) {
        return Err(Error::arg("gamma_star", "must lie in [0, 1]"));
    }
    if !(pi_star > 0.0 && pi_star <= 1.0) {
        return Err(Error::arg("pi_star", "must lie in (0, 1]"));
    }
    if gamma_star == 0.0 {
        return Err(Error::DegenerateGap { lambda: 1.0 });
    }
    let lower = (1.0 / gamma_star - 1.0) * std::f64::consts::LN_2;
    let upper = (4.0 / pi_star).ln() / gamma_star;
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary;

    fn profile(c: &ChainSpec, t: usize) -> MixingProfile {
        tv_profile(c, &stationary(c).unwrap(), t)
    }

    #[test]
    fn iid_profile() {
        let c = ChainSpec::iid(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let p = profile(&c, 5);
        assert!((p.d(0) - 0.5).abs() < 1e-15);
        assert!(p.d_values[1..].iter().all(|&d| d < 1e-15));
        assert_eq!(p.t_mix(0.1, GuardMode::Guarded).unwrap(), 1);
        assert_eq!(p.tau_min(GuardMode::Guarded), 4.0);
    }

    #[test]
    fn symmetric_profile_closed_form() {
        let c = ChainSpec::two_state(0.25, [1.0, 0.0]).unwrap();
        let p = profile(&c, 20);
        for t in 0..=20 {
            assert!((p.d_raw[t] - 0.5 * 0.5f64.powi(t as i32)).abs() < 1e-12);
        }
        assert_eq!(p.t_mix_quarter(GuardMode::Guarded).unwrap(), 1);
        let tau = p.tau_min(GuardMode::Guarded);
        assert!((tau - (1.75f64 / 0.75).powi(2)).abs() < 1e-12);
        assert_eq!(p.tau_min(GuardMode::Literal), 0.0);
    }

    #[test]
    fn flip_chain_never_mixes() {
        let c = ChainSpec::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0, 0.0]).unwrap();
        let p = profile(&c, 50);
        assert!(p.d_raw.iter().all(|&d| (d - 0.5).abs() < 1e-15));
        assert!(matches!(p.t_mix(0.25, GuardMode::Guarded), Err(Error::Unresolved { .. })));
        assert!(!p.converged);
    }

    #[test]
    fn bracket_values() {
        let (lo, hi) = gap_mixing_bracket(1.0, 0.5).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 8f64.ln()).abs() < 1e-15);
        let (lo, hi) = gap_mixing_bracket(0.5, 0.5).unwrap();
        assert!((lo - 2f64.ln()).abs() < 1e-15);
        assert!((hi - 2.0 * 8f64.ln()).abs() < 1e-14);
        assert!(matches!(gap_mixing_bracket(0.0, 0.5), Err(Error::DegenerateGap { .. })));
    }

    #[test]
    fn auto_horizon_stops_early() {
        let c = ChainSpec::two_state(0.25, [1.0, 0.0]).unwrap();
        let pi = stationary(&c).unwrap();
        let p = auto_profile(&c, &pi, 0.5);
        // 0.5^(t+1) < 1e-6 first at t = 19
        assert_eq!(p.horizon, 19);
        assert!(p.converged);
    }

    #[test]
    fn smoothing_is_running_min() {
        let p = MixingProfile::from_raw(vec![0.5, 0.3, 0.3000000000001, 0.1]);
        assert_eq!(p.d_values, vec![0.5, 0.3, 0.3, 0.1]);
    }
}
