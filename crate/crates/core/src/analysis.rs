//! One-shot analysis bundling the chain constants every bound needs.

use serde::Serialize;

use crate::chain::{stationary, ChainSpec, StationaryResult};
use crate::error::{Error, Result};
use crate::mixing::{auto_profile, tv_profile, GuardMode, MixingProfile};
use crate::spectral::{chi_divergence, spectral_report, NormConvention, SpectralReport};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    pub convention: NormConvention,
    pub guard: GuardMode,
    /// Fixed mixing horizon; `None` picks one automatically.
    pub horizon: Option<usize>,
}

/// Constants of a chain as consumed by the bound evaluators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainAnalysis {
    pub stationary: StationaryResult,
    pub spectral: SpectralReport,
    pub profile: MixingProfile,
    pub guard: GuardMode,
    pub convention: NormConvention,
    pub lambda: f64,
    pub gamma_star: f64,
    /// `||dnu/dpi - 1||_2` under `convention`.
    pub chi_div: f64,
    /// `tau_min` under `guard`.
    pub tau_min: f64,
    pub tau_min_guarded: f64,
    pub tau_min_literal: f64,
    pub tau_min_exact: bool,
    /// `t_mix(1/4)` under `guard`, `None` when the horizon is too short.
    pub t_mix: Option<usize>,
}

impl ChainAnalysis {
    pub fn new(spec: &ChainSpec, opts: AnalysisOptions) -> Result<Self> {
        let stationary = stationary(spec)?;
        let spectral = spectral_report(spec, &stationary)?;
        let chi_div = chi_divergence(spec, &stationary, opts.convention)?;
        let profile = match opts.horizon {
            Some(h) => tv_profile(spec, &stationary, h),
            None => auto_profile(spec, &stationary, spectral.gamma_star),
        };
        let tau_min_guarded = profile.tau_min(GuardMode::Guarded);
        let tau_min_literal = profile.tau_min(GuardMode::Literal);
        let tau_min = match opts.guard {
            GuardMode::Guarded => tau_min_guarded,
            GuardMode::Literal => tau_min_literal,
        };
        Ok(ChainAnalysis {
            lambda: spectral.lambda,
            gamma_star: spectral.gamma_star,
            tau_min_exact: profile.tau_min_is_exact(opts.guard),
            t_mix: profile.t_mix_quarter(opts.guard).ok(),
            stationary,
            spectral,
            profile,
            guard: opts.guard,
            convention: opts.convention,
            chi_div,
            tau_min,
            tau_min_guarded,
            tau_min_literal,
        })
    }

    pub fn of(spec: &ChainSpec) -> Result<Self> {
        ChainAnalysis::new(spec, AnalysisOptions::default())
    }

    pub fn pi(&self) -> &[f64] {
        &self.stationary.pi
    }

    /// Fail early when `lambda = 1` would make every bound infinite.
    pub fn require_gap(&self) -> Result<()> {
        if self.lambda >= 1.0 {
            Err(Error::DegenerateGap { lambda: self.lambda })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_analysis() {
        let c = ChainSpec::two_state(0.25, [0.5, 0.5]).unwrap();
        let a = ChainAnalysis::of(&c).unwrap();
        assert!((a.lambda - 0.5).abs() < 1e-12);
        assert!(a.chi_div < 1e-12);
        assert!((a.tau_min - 49.0 / 9.0).abs() < 1e-12);
        assert_eq!(a.tau_min_literal, 0.0);
        assert_eq!(a.t_mix, Some(1));
        assert!(a.tau_min_exact);
    }
}
