//! Spectral quantities of a kernel: the L2(pi) operator norm of `Q - E_pi`,
//! the absolute spectral gap, the spectrum, and the initial-law divergence.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, StationaryResult};
use crate::error::{Error, Result};

/// Eigenvalues within this distance of 1 count as the unit eigenvalue.
pub const UNIT_CLUSTER_TOL: f64 = 1e-9;

/// How `||dnu/dpi - 1||_2` weights the states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormConvention {
    /// `sqrt(sum_x pi(x) (nu(x)/pi(x) - 1)^2)`.
    #[default]
    PiWeighted,
    /// `sqrt(sum_x (nu(x)/pi(x) - 1)^2)`.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub pi: Vec<f64>,
    pub pi_star: f64,
    pub irreducible: bool,
    pub reversible: bool,
    pub period: usize,
    pub lambda: f64,
    pub gamma_star: f64,
    /// Eigenvalues of `Q` as `[re, im]`, sorted by decreasing modulus.
    pub spectrum: Vec<[f64; 2]>,
    pub chi_div_pi_weighted: f64,
    pub chi_div_unweighted: f64,
    pub in_m2: bool,
}

fn require_positive(pi: &StationaryResult) -> Result<()> {
    if pi.pi_star > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidChain(
            "stationary law vanishes on transient states; the L2(pi) norm is degenerate".into(),
        ))
    }
}

/// `D^{1/2} A D^{-1/2}` with `D = diag(pi)`.
fn pi_similarity(a: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| pi[i].sqrt() * a[(i, j)] / pi[j].sqrt())
}

/// `lambda = ||Q - 1 pi^T||` as an operator on L2(pi): the largest singular
/// value of the pi-similarity transform.
pub fn l2_gap(spec: &ChainSpec, pi: &StationaryResult) -> Result<f64> {
    require_positive(pi)?;
    let n = spec.n_states();
    let centred = DMatrix::from_fn(n, n, |i, j| spec.q()[(i, j)] - pi.pi[j]);
    let sv = pi_similarity(&centred, &pi.pi).singular_values();
    let lambda = sv.iter().copied().fold(0.0, f64::max);
    Ok(lambda.clamp(0.0, 1.0))
}

/// Eigenvalues of `Q`, largest modulus first.
pub fn spectrum(spec: &ChainSpec) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = spec.q().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    ev
}

/// `gamma* = 1 - max{|xi| : xi != 1}` when 1 is a simple eigenvalue, else 0.
pub fn absolute_gap(spec: &ChainSpec) -> f64 {
    absolute_gap_from_spectrum(&spectrum(spec))
}

pub fn absolute_gap_from_spectrum(ev: &[Complex<f64>]) -> f64 {
    let is_unit = |z: &Complex<f64>| (z - Complex::new(1.0, 0.0)).norm() <= UNIT_CLUSTER_TOL;
    let units = ev.iter().filter(|z| is_unit(z)).count();
    if units > 1 {
        return 0.0;
    }
    let rest = ev
        .iter()
        .filter(|z| !is_unit(z))
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let gap = 1.0 - rest;
    // eigenvalues on the unit circle up to rounding leave no gap
    if gap <= UNIT_CLUSTER_TOL {
        0.0
    } else {
        gap.min(1.0)
    }
}

/// `||dnu/dpi - 1||_2` under the chosen convention.
pub fn chi_divergence(spec: &ChainSpec, pi: &StationaryResult, convention: NormConvention) -> Result<f64> {
    let mut acc = 0.0;
    for (x, (&nu, &p)) in spec.nu().iter().zip(&pi.pi).enumerate() {
        if p <= 0.0 {
            if nu > 0.0 {
                return Err(Error::DivergentDensity { state: x });
            }
            continue;
        }
        let r = nu / p - 1.0;
        acc += match convention {
            NormConvention::PiWeighted => p * r * r,
            NormConvention::Unweighted => r * r,
        };
    }
    Ok(acc.sqrt())
}

/// Everything above for one chain.
pub fn spectral_report(spec: &ChainSpec, pi: &StationaryResult) -> Result<SpectralReport> {
    let lambda = l2_gap(spec, pi)?;
    let ev = spectrum(spec);
    let gamma_star = absolute_gap_from_spectrum(&ev);
    let weighted = chi_divergence(spec, pi, NormConvention::PiWeighted);
    let unweighted = chi_divergence(spec, pi, NormConvention::Unweighted);
    let in_m2 = weighted.is_ok();
    Ok(SpectralReport {
        pi: pi.pi.clone(),
        pi_star: pi.pi_star,
        irreducible: pi.irreducible,
        reversible: pi.reversible,
        period: pi.period,
        lambda,
        gamma_star,
        spectrum: ev.iter().map(|z| [z.re, z.im]).collect(),
        chi_div_pi_weighted: weighted.unwrap_or(f64::INFINITY),
        chi_div_unweighted: unweighted.unwrap_or(f64::INFINITY),
        in_m2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary;

    fn two(p: f64) -> ChainSpec {
        ChainSpec::two_state(p, [1.0, 0.0]).unwrap()
    }

    #[test]
    fn iid_chain_has_zero_lambda() {
        let c = ChainSpec::iid(&[0.3, 0.7], &[1.0, 0.0]).unwrap();
        let pi = stationary(&c).unwrap();
        assert!(l2_gap(&c, &pi).unwrap() < 1e-15);
        assert!((absolute_gap(&c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_two_state() {
        let c = two(0.25);
        let pi = stationary(&c).unwrap();
        assert!((l2_gap(&c, &pi).unwrap() - 0.5).abs() < 1e-12);
        assert!((absolute_gap(&c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flip_chain() {
        let c = ChainSpec::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0, 0.0]).unwrap();
        let pi = stationary(&c).unwrap();
        assert!((l2_gap(&c, &pi).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(absolute_gap(&c), 0.0);
    }

    #[test]
    fn identity_has_no_gap() {
        let c = ChainSpec::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 0.0]).unwrap();
        assert_eq!(absolute_gap(&c), 0.0);
    }

    #[test]
    fn single_state() {
        let c = ChainSpec::from_rows(&[vec![1.0]], &[1.0]).unwrap();
        let pi = stationary(&c).unwrap();
        assert_eq!(absolute_gap(&c), 1.0);
        assert_eq!(l2_gap(&c, &pi).unwrap(), 0.0);
    }

    #[test]
    fn chi_divergence_conventions() {
        let c = two(0.25);
        let pi = stationary(&c).unwrap();
        let w = chi_divergence(&c, &pi, NormConvention::PiWeighted).unwrap();
        let u = chi_divergence(&c, &pi, NormConvention::Unweighted).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((u - 2f64.sqrt()).abs() < 1e-12);
        let at_pi = c.with_initial(&[0.5, 0.5]).unwrap();
        assert!(chi_divergence(&at_pi, &pi, NormConvention::PiWeighted).unwrap() < 1e-12);
        assert!(chi_divergence(&at_pi, &pi, NormConvention::Unweighted).unwrap() < 1e-12);
    }

    #[test]
    fn divergent_density() {
        let c = ChainSpec::from_rows(
            &[vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.5, 0.5]],
            &[1.0, 0.0, 0.0],
        )
        .unwrap();
        let pi = stationary(&c).unwrap();
        assert_eq!(
            chi_divergence(&c, &pi, NormConvention::PiWeighted),
            Err(Error::DivergentDensity { state: 0 })
        );
    }

    #[test]
    fn non_reversible_lambda_dominates() {
        // doubly stochastic cyclic drift, not reversible
        let c = ChainSpec::from_rows(
            &[vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8], vec![0.8, 0.1, 0.1]],
            &[1.0, 0.0, 0.0],
        )
        .unwrap();
        let pi = stationary(&c).unwrap();
        assert!(!pi.reversible);
        let lambda = l2_gap(&c, &pi).unwrap();
        assert!(lambda >= 1.0 - absolute_gap(&c) - 1e-9);
    }
}
