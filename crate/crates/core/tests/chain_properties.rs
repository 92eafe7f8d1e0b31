use approx::assert_abs_diff_eq;
use genbound_core::chain::{lift_hmm, lift_prior_product, sample_trajectory, stationary, validate_chain};
use genbound_core::mixing::{gap_mixing_bracket, tv_profile};
use genbound_core::spectral::{absolute_gap, chi_divergence, l2_gap, spectrum};
use genbound_core::{ChainAnalysis, ChainSpec, GuardMode, NormConvention};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn normalise(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Strictly positive kernel on 2..=5 states with a random start.
fn any_chain() -> impl Strategy<Value = ChainSpec> {
    (2usize..=5)
        .prop_flat_map(|k| (Just(k), prop::collection::vec(0.02f64..1.0, k * k), prop::collection::vec(0.01f64..1.0, k)))
        .prop_map(|(k, w, nu)| {
            let rows: Vec<Vec<f64>> = w.chunks(k).map(normalise).collect();
            ChainSpec::from_rows(&rows, &normalise(&nu)).unwrap()
        })
}

/// `Q = W / rowsum(W)` with `W` symmetric is reversible for `pi ~ rowsum(W)`.
fn reversible_chain() -> impl Strategy<Value = ChainSpec> {
    (2usize..=5)
        .prop_flat_map(|k| (Just(k), prop::collection::vec(0.02f64..1.0, k * k)))
        .prop_map(|(k, w)| {
            let sym = DMatrix::from_fn(k, k, |i, j| w[i.min(j) * k + i.max(j)]);
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|i| normalise(&sym.row(i).iter().copied().collect::<Vec<_>>()))
                .collect();
            let mut nu = vec![0.0; k];
            nu[0] = 1.0;
            ChainSpec::from_rows(&rows, &nu).unwrap()
        })
}

fn reverse_perm(k: usize) -> Vec<usize> {
    (0..k).rev().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_is_fixed_point(c in any_chain()) {
        let s = stationary(&c).unwrap();
        let k = c.n_states();
        for y in 0..k {
            let v: f64 = (0..k).map(|x| s.pi[x] * c.q()[(x, y)]).sum();
            prop_assert!((v - s.pi[y]).abs() < 1e-10);
        }
        prop_assert!((s.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let min = s.pi.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(s.pi_star, min);
        prop_assert!(s.pi_star > 0.0 && s.irreducible);
        prop_assert!(validate_chain(&c).is_empty());
    }

    #[test]
    fn constants_in_range(c in any_chain()) {
        let s = stationary(&c).unwrap();
        let lambda = l2_gap(&c, &s).unwrap();
        let gamma = absolute_gap(&c);
        prop_assert!((0.0..=1.0).contains(&lambda));
        prop_assert!((0.0..=1.0).contains(&gamma));
        // the operator norm dominates the second eigenvalue modulus
        prop_assert!(lambda >= 1.0 - gamma - 1e-9);
        let ev = spectrum(&c);
        prop_assert!(ev.iter().any(|z| (z.re - 1.0).abs() < 1e-10 && z.im.abs() < 1e-10));
        prop_assert!(ev.iter().all(|z| z.norm() <= 1.0 + 1e-10));
    }

    #[test]
    fn reversible_gap_identity(c in reversible_chain()) {
        let s = stationary(&c).unwrap();
        prop_assert!(s.reversible);
        let lambda = l2_gap(&c, &s).unwrap();
        let second = spectrum(&c).iter().skip(1).map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!((lambda - second).abs() < 1e-9);
        prop_assert!((lambda - (1.0 - absolute_gap(&c))).abs() < 1e-9);
    }

    #[test]
    fn spectrum_survives_similarity(c in any_chain()) {
        let s = stationary(&c).unwrap();
        let k = c.n_states();
        let sim = DMatrix::from_fn(k, k, |i, j| s.pi[i].sqrt() * c.q()[(i, j)] / s.pi[j].sqrt());
        let mut a: Vec<f64> = spectrum(&c).iter().map(|z| z.norm()).collect();
        let mut b: Vec<f64> = sim.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn chi_divergence_properties(c in any_chain()) {
        let s = stationary(&c).unwrap();
        let at_pi = c.with_initial(&s.pi).unwrap();
        for conv in [NormConvention::PiWeighted, NormConvention::Unweighted] {
            prop_assert!(chi_divergence(&at_pi, &s, conv).unwrap() < 1e-12);
            let perm = reverse_perm(c.n_states());
            let r = c.relabel(&perm).unwrap();
            let sr = stationary(&r).unwrap();
            let before = chi_divergence(&c, &s, conv).unwrap();
            let after = chi_divergence(&r, &sr, conv).unwrap();
            prop_assert!((before - after).abs() < 1e-9 * before.max(1.0));
        }
    }

    #[test]
    fn profile_properties(c in any_chain()) {
        let a = ChainAnalysis::of(&c).unwrap();
        let d = &a.profile.d_values;
        prop_assert!(d.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(a.tau_min_guarded >= 4.0);
        let t = a.t_mix.unwrap();
        prop_assert!(d[t] <= 0.25 && (t == 1 || d[t - 1] > 0.25));
        let perm = reverse_perm(c.n_states());
        let r = ChainAnalysis::of(&c.relabel(&perm).unwrap()).unwrap();
        prop_assert!((a.tau_min_guarded - r.tau_min_guarded).abs() < 1e-9);
        if a.gamma_star > 0.0 {
            let (lo, hi) = gap_mixing_bracket(a.gamma_star, a.spectral.pi_star).unwrap();
            prop_assert!(lo <= t as f64 && t as f64 <= hi);
        }
    }

    #[test]
    fn trajectories_reproducible(c in any_chain(), seed in any::<u64>(), n in 1usize..300) {
        let a = sample_trajectory(&c, n, seed).unwrap();
        let b = sample_trajectory(&c, n, seed).unwrap();
        prop_assert_eq!(&a.indices, &b.indices);
        prop_assert_eq!(a.indices.len(), n);
        prop_assert!(a.indices.iter().all(|&i| i < c.n_states()));
    }

    #[test]
    fn hmm_lift_stationary(c in any_chain(), g in prop::collection::vec(0.05f64..1.0, 15)) {
        let k = c.n_states();
        let labels = 3;
        let rows: Vec<Vec<f64>> = g.chunks(labels).take(k).map(normalise).collect();
        let e = DMatrix::from_fn(k, labels, |i, j| rows[i][j]);
        let lifted = lift_hmm(&c, &e, None).unwrap();
        let pi = stationary(&c).unwrap().pi;
        let lifted_pi = stationary(&lifted).unwrap().pi;
        for x in 0..k {
            for y in 0..labels {
                prop_assert!((lifted_pi[x * labels + y] - pi[x] * e[(x, y)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trivial_prior_lift_changes_nothing(c in any_chain()) {
        let lifted = lift_prior_product(&c, &[1.0]).unwrap();
        let a = ChainAnalysis::of(&c).unwrap();
        let b = ChainAnalysis::of(&lifted).unwrap();
        prop_assert!((a.lambda - b.lambda).abs() < 1e-12);
        prop_assert!((a.gamma_star - b.gamma_star).abs() < 1e-12);
        prop_assert!((a.chi_div - b.chi_div).abs() < 1e-12);
        prop_assert!((a.tau_min - b.tau_min).abs() < 1e-12);
        for (x, y) in a.pi().iter().zip(b.pi()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn validate_reports_locations() {
    let bad = ChainSpec::from_parts_unchecked(
        vec!["a".into(), "b".into()],
        DMatrix::from_row_slice(2, 2, &[0.6, 0.6, 0.5, 0.5]),
        nalgebra::DVector::from_vec(vec![0.5, 0.6]),
    );
    let v = validate_chain(&bad);
    let text: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    assert!(text.iter().any(|t| t.contains("row 0")), "{text:?}");
    assert!(text.iter().any(|t| t.contains("nu")), "{text:?}");
}

#[test]
fn two_state_profile_closed_form() {
    for p in [0.1, 0.25, 0.4] {
        let c = ChainSpec::two_state(p, [1.0, 0.0]).unwrap();
        let prof = tv_profile(&c, &stationary(&c).unwrap(), 30);
        for t in 0..=30 {
            assert_abs_diff_eq!(prof.d(t), 0.5 * (1.0 - 2.0 * p).powi(t as i32), epsilon = 1e-12);
        }
    }
}

#[test]
fn literal_tau_min_can_vanish() {
    let c = ChainSpec::iid(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
    let a = ChainAnalysis::of(&c).unwrap();
    assert_eq!(a.tau_min_literal, 0.0);
    assert_eq!(a.tau_min_guarded, 4.0);
    assert_eq!(a.profile.t_mix(0.25, GuardMode::Literal).unwrap(), 1);
}
