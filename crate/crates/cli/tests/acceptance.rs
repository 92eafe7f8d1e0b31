//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process fails when a criterion fails, except for those listed in
//! `KNOWN_FAILING`, which are evaluated in full and reported as FAIL but do not
//! stop the run; if one of them starts passing the run fails so the list gets
//! updated.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{battery, classes, random_class, uniform, SAMPLE_SIZES, TWO_STATE_P};
use genbound_core::analysis::AnalysisOptions;
use genbound_core::bounds::{
    a_n, b_n, bound_bayes, bound_deep_adaptive, bound_deep_layered, bound_family, bound_levy, bound_pac_vc,
    bound_sup_cdf, bound_thm1, bound_two_sided, default_grid, dyadic_ramp_family, gamma_margin, levy_distance,
    riemann_zeta, AdaptiveCapacity, Flavor, MarkovConstants, PriorAverage, Sample, StepCdf,
};
use genbound_core::chain::{lift_prior_product, sample_trajectory, stationary};
use genbound_core::empirical::{exact_cost, gaussian_complexity, rademacher_complexity, EXACT_CAP};
use genbound_core::mixing::{gap_mixing_bracket, tv_profile};
use genbound_core::reduce::{
    arma_lift, companion_lift, gaussian_noise, max_deviation, mixture_indicator_check, mixture_lift, simulate_arma,
    simulate_arma_lifted, simulate_lifted, simulate_linear,
};
use genbound_core::rng::stream;
use genbound_core::verify::{
    verify_mcdiarmid, verify_replica_identity, verify_symmetrization, verify_theorem_tail, verify_variance,
    CheckStatus, Statistic, TailTarget,
};
use genbound_core::{BoundReport, ChainAnalysis, ChainSpec, Error, FunctionClass, GuardMode, MarginLoss};
use nalgebra::Matrix2;
use rand::Rng;

const REPLICAS: usize = 10_000;
const SEED: u64 = 0xC0FFEE;

/// Criteria that are evaluated faithfully but are known not to hold.
/// Criterion 5: the sign-swap identity needs exchangeable coordinates, which a
/// dependent chain does not have; it holds on the i.i.d. cases only.
const KNOWN_FAILING: &[usize] = &[5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_time(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    if elapsed <= limit {
        o
    } else {
        outcome(false, format!("{} (over the {:?} budget)", o.detail, limit))
    }
}

// 1 ----------------------------------------------------------------------

fn spectral_exactness() -> Outcome {
    let c = ChainSpec::two_state(0.25, [0.5, 0.5]).unwrap();
    let a = ChainAnalysis::of(&c).unwrap();
    let eig = Matrix2::new(0.75, 0.25, 0.25, 0.75).symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    let lambda_oracle = ev[1].abs();
    let gamma_oracle = 1.0 - ev[1].abs();
    let two_ok = (a.lambda - lambda_oracle).abs() <= 1e-10
        && (a.gamma_star - gamma_oracle).abs() <= 1e-10
        && (a.lambda - 0.5).abs() <= 1e-10;
    let iid = ChainSpec::iid(&uniform(3), &uniform(3)).unwrap();
    let b = ChainAnalysis::of(&iid).unwrap();
    let iid_ok = b.lambda == 0.0 && b.gamma_star == 1.0;
    outcome(
        two_ok && iid_ok,
        format!(
            "two-state lambda={} gamma*={} (oracle {lambda_oracle}, {gamma_oracle}); iid lambda={} gamma*={}",
            a.lambda, a.gamma_star, b.lambda, b.gamma_star
        ),
    )
}

// 2 ----------------------------------------------------------------------

fn tau_factor(eps: f64) -> f64 {
    ((2.0 - eps) / (1.0 - eps)).powi(2)
}

fn mixing_identities() -> Outcome {
    let c = ChainSpec::two_state(0.25, [1.0, 0.0]).unwrap();
    let a = ChainAnalysis::of(&c).unwrap();
    let profile = tv_profile(&c, &stationary(&c).unwrap(), 20);
    let d_ok = (0..=20).all(|t| (profile.d(t) - 0.5 * 0.5f64.powi(t as i32)).abs() <= 1e-12);
    let t_mix_ok = a.t_mix == Some(1);

    // epsilon grid with the closed form d(t) = 0.5^(t+1)
    let h = 1e-4;
    let mut grid_best = (f64::INFINITY, 0.0, 0usize);
    for k in 1..10_000 {
        let eps = k as f64 * h;
        let t = (0..).find(|&t| 0.5f64.powi(t + 1) <= eps).unwrap().max(1) as usize;
        let v = t as f64 * tau_factor(eps);
        if v < grid_best.0 {
            grid_best = (v, eps, t);
        }
    }
    let (grid_tau, eps_g, t_g) = grid_best;
    let exact = a.tau_min_guarded;
    let cell = t_g as f64 * (tau_factor(eps_g) - tau_factor(eps_g - h));
    let tau_ok = exact <= grid_tau && grid_tau - exact <= cell && (exact - 49.0 / 9.0).abs() < 1e-9;

    let mut bracket_fail = Vec::new();
    for (name, chain) in battery() {
        let a = ChainAnalysis::of(&chain).unwrap();
        let (lo, hi) = gap_mixing_bracket(a.gamma_star, a.spectral.pi_star).unwrap();
        let t = a.t_mix.expect("battery chains mix") as f64;
        if !(lo <= t && t <= hi) {
            bracket_fail.push(format!("{name}: {lo} <= {t} <= {hi}"));
        }
    }
    outcome(
        d_ok && t_mix_ok && tau_ok && bracket_fail.is_empty(),
        format!(
            "d(t) {}; t_mix={:?}; tau_min exact={exact} grid={grid_tau} (cell {cell:.2e}); bracket failures {:?}",
            if d_ok { "matches" } else { "differs" },
            a.t_mix,
            bracket_fail
        ),
    )
}

// 3 ----------------------------------------------------------------------

fn complexity_oracle() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for (ci, (name, chain)) in battery().into_iter().enumerate() {
        let k = chain.n_states();
        for (cname, class) in classes(k, ci as u64) {
            for n in [2usize, 4, 6, 8] {
                if exact_cost(k, n) * class.len() as f64 > EXACT_CAP {
                    continue;
                }
                let ex = rademacher_complexity(&class, &chain, n, REPLICAS, SEED, true).unwrap();
                let mc = rademacher_complexity(&class, &chain, n, REPLICAS, SEED + cases, false).unwrap();
                let se = (ex.stderr.powi(2) + mc.stderr.powi(2)).sqrt();
                cases += 1;
                if (ex.value - mc.value).abs() > 3.0 * se {
                    bad.push(format!("{name} {cname} n={n}: exact {} mc {} se {se}", ex.value, mc.value));
                }
            }
        }
    }
    let chain = ChainSpec::two_state(0.3, [0.5, 0.5]).unwrap();
    let c = -0.7f64;
    let single = FunctionClass::from_values(vec![vec![c, c]]).unwrap();
    let r1 = rademacher_complexity(&single, &chain, 1, REPLICAS, SEED, false).unwrap();
    let r2 = rademacher_complexity(&single, &chain, 2, REPLICAS, SEED, false).unwrap();
    let g1 = gaussian_complexity(&single, &chain, 1, REPLICAS, SEED).unwrap();
    let closed = [
        ("R1", r1.value, r1.stderr, c.abs()),
        ("R2", r2.value, r2.stderr, c.abs() / 2.0),
        ("G1", g1.value, g1.stderr, c.abs() * (2.0 / PI).sqrt()),
    ];
    for (label, v, se, want) in closed {
        if (v - want).abs() > 3.0 * se + 1e-12 {
            bad.push(format!("{label}: {v} vs {want} (se {se})"));
        }
    }
    outcome(
        cases >= 20 && bad.is_empty(),
        format!("{cases} exact/MC cases, singleton closed forms checked; mismatches {bad:?}"),
    )
}

// 4 ----------------------------------------------------------------------

fn symmetrization_sandwich() -> Outcome {
    let mut runs = 0;
    let mut upper_bad = Vec::new();
    let mut lower_bad = Vec::new();
    let mut vacuous = 0;
    for (ci, (name, chain)) in battery().into_iter().enumerate() {
        for (cname, class) in classes(chain.n_states(), ci as u64) {
            for n in SAMPLE_SIZES {
                let r = verify_symmetrization(&chain, &class, n, REPLICAS, SEED, AnalysisOptions::default()).unwrap();
                runs += 1;
                for c in &r.checks {
                    if c.label.starts_with("upper") && !c.holds_with_margin(3.0) {
                        upper_bad.push(format!("{name} {cname} n={n} {}: slack {} se {}", c.label, c.slack, c.lhs_stderr));
                    }
                    if c.label.starts_with("lower") {
                        match c.status {
                            CheckStatus::VacuousPass => vacuous += 1,
                            CheckStatus::Pass => {}
                            CheckStatus::Fail => lower_bad.push(format!("{name} {cname} n={n} {}", c.label)),
                        }
                    }
                }
            }
        }
    }
    outcome(
        upper_bad.is_empty() && lower_bad.is_empty(),
        format!(
            "{runs} runs; upper failures {upper_bad:?}; lower failures {lower_bad:?}; {vacuous} lower checks vacuous"
        ),
    )
}

// 5 ----------------------------------------------------------------------

fn replica_identity() -> Outcome {
    let mut chains = vec![("iid-2".to_string(), ChainSpec::iid(&[0.5, 0.5], &[0.5, 0.5]).unwrap())];
    for p in TWO_STATE_P {
        chains.push((format!("two-state p={p}"), ChainSpec::two_state(p, [1.0, 0.0]).unwrap()));
    }
    let mut total = 0;
    let mut held = 0;
    let mut worst = (0.0f64, String::new());
    let mut failing_chains = std::collections::BTreeSet::new();
    for (ci, (name, chain)) in chains.iter().enumerate() {
        for size in 1..=3 {
            let class = random_class(2, size, 500 + ci as u64 * 7 + size as u64);
            for n in 1..=4 {
                let r = verify_replica_identity(chain, &class, n, REPLICAS, SEED).unwrap();
                total += 1;
                if r.pass {
                    held += 1;
                } else {
                    failing_chains.insert(name.clone());
                    let dev = r.diagnostics["deviation"].as_f64().unwrap();
                    if dev > worst.0 {
                        worst = (dev, format!("{name} |F|={size} n={n}"));
                    }
                }
            }
        }
    }
    outcome(
        held == total,
        format!(
            "{held}/{total} enumerable cases equal within 1e-12; failing chains {failing_chains:?}; largest gap {:.4} at {}",
            worst.0, worst.1
        ),
    )
}

// 6 ----------------------------------------------------------------------

fn theorem_tail() -> Outcome {
    let mut evidence = 0;
    let mut vacuous = 0;
    let mut bad = Vec::new();
    let targets = [TailTarget::Thm1Rademacher, TailTarget::TwoSided];
    let want = [PI * PI / 3.0 * (-4.5f64).exp(), 2.0 * PI * PI / 3.0 * (-4.5f64).exp()];
    for (ci, (name, chain)) in battery().into_iter().enumerate() {
        for (cname, class) in classes(chain.n_states(), ci as u64) {
            for n in SAMPLE_SIZES {
                for (target, tail) in targets.iter().zip(want) {
                    let r = verify_theorem_tail(*target, &chain, &class, n, 1.5, REPLICAS, SEED, AnalysisOptions::default())
                        .unwrap();
                    let c = &r.checks[0];
                    if (c.rhs - tail.min(1.0)).abs() > 1e-15 {
                        bad.push(format!("{name} {cname} n={n} {}: tail {} != {tail}", target.name(), c.rhs));
                    }
                    match c.status {
                        CheckStatus::Pass => evidence += 1,
                        CheckStatus::VacuousPass => vacuous += 1,
                        CheckStatus::Fail => bad.push(format!(
                            "{name} {cname} n={n} {}: frequency {} > {}",
                            target.name(),
                            c.lhs,
                            c.rhs
                        )),
                    }
                }
            }
        }
    }
    outcome(
        bad.is_empty() && evidence > 0,
        format!("{evidence} non-vacuous passes, {vacuous} vacuous; failures {bad:?}"),
    )
}

// 7 ----------------------------------------------------------------------

fn concentration() -> Outcome {
    let mut runs = 0;
    let mut bad = Vec::new();
    let guarded = AnalysisOptions {
        guard: GuardMode::Guarded,
        ..AnalysisOptions::default()
    };
    for (ci, (name, chain)) in battery().into_iter().enumerate() {
        let class = random_class(chain.n_states(), 3, 900 + ci as u64);
        for (fi, f) in class.values().iter().enumerate() {
            for n in SAMPLE_SIZES {
                let v = verify_variance(&chain, f, n, 0, REPLICAS, SEED, guarded).unwrap();
                runs += 1;
                if !v.checks.iter().all(|c| c.holds_with_margin(3.0)) {
                    bad.push(format!("variance {name} f{fi} n={n}"));
                }
                let stat = Statistic::Mean { f: f.clone() };
                let m = verify_mcdiarmid(&chain, &stat, None, n, &[0.05, 0.1, 0.2, 0.4], REPLICAS, SEED, GuardMode::Guarded)
                    .unwrap();
                runs += 1;
                for c in m.checks.iter().filter(|c| c.status == CheckStatus::Fail) {
                    bad.push(format!("mcdiarmid {name} f{fi} n={n} {}: {} > {} (se {})", c.label, c.lhs, c.rhs, c.lhs_stderr));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("{runs} runs; failures {bad:?}"))
}

// 8 ----------------------------------------------------------------------

fn reductions() -> Outcome {
    let a = [0.5, -0.3, 0.1];
    let lift = companion_lift(&a).unwrap();
    let init = [1.0, -2.0, 0.5];
    let companion_dev = max_deviation(&simulate_linear(&a, 0.0, &init, 200), &simulate_lifted(&lift, &init, 200));

    let mut arma_dev = Vec::new();
    for (c, ar, ma) in [(0.3, vec![0.6], vec![0.4]), (-0.2, vec![0.5, -0.2], vec![0.3, 0.25])] {
        let l = arma_lift(c, &ar, &ma).unwrap();
        let noise = gaussian_noise(&mut stream(SEED, ar.len() as u64), 1.0, 1000);
        let start = vec![l.offset; ar.len()];
        arma_dev.push(max_deviation(
            &simulate_arma(c, &ar, &ma, &start, &noise),
            &simulate_arma_lifted(&l, &start, &noise),
        ));
    }

    let k1 = ChainSpec::two_state(0.2, [1.0, 0.0]).unwrap();
    let k2 = common::random_reversible(3, 77);
    let values = vec![vec![-1.0, 1.0], vec![0.0, 0.5, 2.0]];
    let mix = mixture_lift(&[k1, k2], &[0.4, 0.5], Some(&values)).unwrap();
    let check = mixture_indicator_check(&mix, |y| y <= 0.3, 500, SEED);
    let mixture_ok = check.direct_count == check.lifted_count && check.steps == 500;

    outcome(
        companion_dev == 0.0 && arma_dev.iter().all(|d| *d < 1e-9) && mixture_ok,
        format!(
            "companion deviation {companion_dev}; ARMA(1,1) {:.2e}, ARMA(2,2) {:.2e}; mixture counts {} vs {}",
            arma_dev[0], arma_dev[1], check.direct_count, check.lifted_count
        ),
    )
}

// 9 ----------------------------------------------------------------------

fn zeta_oracle(s: f64) -> f64 {
    let n = 20_000usize;
    let partial: f64 = (1..=n).rev().map(|k| (k as f64).powf(-s)).sum();
    let nf = n as f64;
    // integral of x^-s over (n, inf) with the trapezoid end correction
    partial + nf.powf(1.0 - s) / (s - 1.0) - 0.5 * nf.powf(-s)
}

fn self_consistent(r: &BoundReport) -> bool {
    r.decomposition.iter().all(|row| row.total.to_bits() == row.sum().to_bits())
        && r.bound_raw.to_bits() == r.recompute().to_bits()
        && r.bound.to_bits() == r.bound_raw.clamp(0.0, 1.0).to_bits()
}

fn formula_consistency() -> Outcome {
    let mut reports = 0;
    let mut bad = Vec::new();
    let mut an_bad = 0;
    let grid = default_grid();
    for (ci, (name, chain)) in battery().into_iter().enumerate() {
        let a = ChainAnalysis::of(&chain).unwrap();
        for n in SAMPLE_SIZES {
            for lam in [0.0, 0.3, a.lambda] {
                let (x, y) = (a_n(1.0, n, lam, a.chi_div).unwrap(), b_n(n, lam, a.chi_div).unwrap());
                an_bad += (x.to_bits() != y.to_bits()) as usize;
            }
        }
        let n = 64;
        let class = random_class(chain.n_states(), 3, 1200 + ci as u64);
        let traj = sample_trajectory(&chain, n, SEED + ci as u64).unwrap();
        let k = MarkovConstants::from_analysis(&a, n).unwrap();
        let sample = Sample::new(&traj, Some(a.pi()));
        let cx = rademacher_complexity(&class, &chain, n, 1000, SEED, false).unwrap();
        let gx = gaussian_complexity(&class, &chain, n, 1000, SEED).unwrap();
        let phi = MarginLoss::ramp_upper();
        let mut all = vec![
            bound_thm1(&class, &sample, &k, &cx, &phi, 1.5, &grid, Flavor::Rademacher).unwrap(),
            bound_thm1(&class, &sample, &k, &gx, &phi, 1.5, &grid, Flavor::Gaussian).unwrap(),
            bound_two_sided(&class, &sample, &k, &cx, 1.5, &grid).unwrap(),
            bound_family(&class, &sample, &k, &cx, &dyadic_ramp_family(10), 1.5).unwrap(),
            bound_pac_vc(&class, &sample, &k, 3, 1.0, 0.05, &grid).unwrap(),
            bound_levy(&k, cx.value, class.m(), 1.5).unwrap(),
            bound_sup_cdf(&k, 1.5).unwrap(),
            bound_deep_layered(&class, &sample, &k, &[1.0, 2.0], &[1.5, 0.75], &gx, &phi, 1.5, &grid).unwrap(),
        ];
        let cap = AdaptiveCapacity {
            lambda_f: 1.3,
            gamma_alpha: 0.8,
            alpha: 3.0,
        };
        all.push(bound_deep_adaptive(&class, &sample, &k, &cap, &gx, &phi, 1.5, &grid).unwrap());
        let prior = [0.3, 0.7];
        let lifted = lift_prior_product(&chain, &prior).unwrap();
        let la = ChainAnalysis::of(&lifted).unwrap();
        let lk = MarkovConstants::from_analysis(&la, n).unwrap();
        let pclass = random_class(lifted.n_states(), 3, 1300 + ci as u64);
        let lcx = rademacher_complexity(&pclass, &lifted, n, 1000, SEED, false).unwrap();
        all.push(
            bound_bayes(
                &pclass,
                &traj,
                &prior,
                &lk,
                &lcx,
                &phi,
                1.5,
                &grid,
                Flavor::Rademacher,
                PriorAverage::Exact,
                Some(la.pi()),
            )
            .unwrap(),
        );
        for r in &all {
            reports += 1;
            if !self_consistent(r) {
                bad.push(format!("{name}: {}", r.theorem));
            }
        }
    }
    let z3 = riemann_zeta(3.0);
    let zeta_ok = (z3 - zeta_oracle(3.0)).abs() <= 1e-9 && (z3 - 1.2020569031595942).abs() <= 1e-9;
    let rejects = |alpha: f64| {
        let chain = ChainSpec::two_state(0.25, [0.5, 0.5]).unwrap();
        let a = ChainAnalysis::of(&chain).unwrap();
        let class = random_class(2, 1, 3);
        let traj = sample_trajectory(&chain, 16, SEED).unwrap();
        let k = MarkovConstants::from_analysis(&a, 16).unwrap();
        let gx = gaussian_complexity(&class, &chain, 16, 200, SEED).unwrap();
        let cap = AdaptiveCapacity {
            lambda_f: 1.0,
            gamma_alpha: 1.0,
            alpha,
        };
        matches!(
            bound_deep_adaptive(&class, &Sample::new(&traj, None), &k, &cap, &gx, &MarginLoss::ramp_upper(), 1.5, &default_grid()),
            Err(Error::ZetaConstraint { .. })
        )
    };
    let zeta_rule = rejects(2.0) && !rejects(3.0);
    outcome(
        bad.is_empty() && an_bad == 0 && zeta_ok && zeta_rule,
        format!(
            "{reports} reports recomputed, mismatches {bad:?}; A_n(M=1) vs B_n mismatches {an_bad}; zeta(3)={z3}; alpha=2 rejected: {zeta_rule}"
        ),
    )
}

// 10 ---------------------------------------------------------------------

fn gamma_margin_grid(f: &[f64], w: &[f64], gamma: f64, n: usize, h: f64) -> f64 {
    let threshold = (n as f64).powf(-0.5 + gamma / 4.0);
    let steps = (1.0 / h).round() as usize;
    let mut best = 0.0;
    for k in 1..=steps {
        let d = k as f64 * h;
        let mass: f64 = f.iter().zip(w).filter(|(v, _)| **v <= d).map(|(_, x)| x).sum();
        if d.powf(gamma / 2.0) * mass <= threshold {
            best = d;
        }
    }
    best
}

/// Step CDF on the integer lattice: `F[i]` is the value at `x = i * 1e-6`.
struct LatticeCdf {
    offset: i64,
    values: Vec<f64>,
}

impl LatticeCdf {
    fn new(jumps: &[(i64, f64)], lo: i64, hi: i64) -> Self {
        let values = (lo..=hi)
            .map(|i| jumps.iter().filter(|(j, _)| *j <= i).map(|(_, v)| *v).fold(0.0, f64::max))
            .collect();
        LatticeCdf { offset: lo, values }
    }

    fn at(&self, i: i64) -> f64 {
        let k = i - self.offset;
        if k < 0 {
            0.0
        } else if k as usize >= self.values.len() {
            1.0
        } else {
            self.values[k as usize]
        }
    }
}

/// Smallest lattice `delta` with `F(x - d) - d <= G(x) <= F(x + d) + d` at
/// every lattice `x`; feasibility is monotone in `delta`, so the `delta` axis
/// of the grid is searched by bisection.
fn levy_grid(f: &LatticeCdf, g: &LatticeCdf, lo: i64, hi: i64, unit: f64) -> f64 {
    let feasible = |k: i64| {
        let d = k as f64 * unit;
        (lo..=hi).all(|i| f.at(i - k) - d <= g.at(i) && g.at(i) <= f.at(i + k) + d)
    };
    let (mut a, mut b) = (-1i64, (1.0 / unit) as i64);
    while b - a > 1 {
        let m = (a + b) / 2;
        if feasible(m) {
            b = m;
        } else {
            a = m;
        }
    }
    b as f64 * unit
}

fn random_lattice_cdf(rng: &mut impl Rng, scale: i64) -> (Vec<(i64, f64)>, Vec<f64>, Vec<f64>) {
    let count = rng.random_range(1..=4);
    let mut pos: Vec<i64> = (0..count).map(|_| rng.random_range(0..=8) * scale).collect();
    pos.sort();
    pos.dedup();
    let mut vals: Vec<f64> = (0..pos.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    vals.sort_by(f64::total_cmp);
    *vals.last_mut().unwrap() = 1.0;
    let jumps = pos.iter().copied().zip(vals.iter().copied()).collect();
    let xs = pos.iter().map(|p| *p as f64 * 1e-6).collect();
    (jumps, xs, vals)
}

fn margin_and_levy() -> Outcome {
    let mut rng = stream(SEED, 10);
    let h = 1e-5;
    let mut gm_bad = Vec::new();
    for case in 0..50 {
        let k = rng.random_range(2..=6);
        let f: Vec<f64> = (0..k).map(|_| rng.random_range(-0.2..1.2)).collect();
        let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let gamma = rng.random_range(0.1..=1.0);
        let n = rng.random_range(4..=400);
        let exact = gamma_margin(&f, &w, gamma, n).unwrap();
        let grid = gamma_margin_grid(&f, &w, gamma, n, h);
        if (exact - grid).abs() > h {
            gm_bad.push(format!("case {case}: exact {exact} grid {grid}"));
        }
    }

    // jump points on multiples of 1/8 so every critical x - delta lies on the 1e-6 lattice
    let scale = 125_000i64;
    let (lo, hi) = (-1_100_000i64, 2_100_000i64);
    let mut levy_bad = Vec::new();
    let mut self_bad = 0;
    for case in 0..50 {
        let (ja, xa, va) = random_lattice_cdf(&mut rng, scale);
        let (jb, xb, vb) = random_lattice_cdf(&mut rng, scale);
        let fa = StepCdf::new(xa, va).unwrap();
        let fb = StepCdf::new(xb, vb).unwrap();
        let exact = levy_distance(&fa, &fb);
        let grid = levy_grid(&LatticeCdf::new(&ja, lo, hi), &LatticeCdf::new(&jb, lo, hi), lo, hi, 1e-6);
        if (exact - grid).abs() > 1e-6 {
            levy_bad.push(format!("case {case}: exact {exact} grid {grid}"));
        }
        self_bad += (levy_distance(&fa, &fa) != 0.0) as usize + (levy_distance(&fb, &fb) != 0.0) as usize;
    }
    outcome(
        gm_bad.is_empty() && levy_bad.is_empty() && self_bad == 0,
        format!("gamma-margin mismatches {gm_bad:?}; Levy mismatches {levy_bad:?}; nonzero L(F,F) {self_bad}"),
    )
}

// 11 ---------------------------------------------------------------------

fn write_fixtures(dir: &Path) {
    std::fs::write(
        dir.join("chain.json"),
        r#"{"states":["a","b","c"],"Q":[[0.6,0.3,0.1],[0.2,0.5,0.3],[0.25,0.25,0.5]],"nu":[1,0,0]}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("class.json"),
        r#"{"M":1,"labeled":false,"functions":[{"name":"f","values":[0.5,-0.25,1]},{"name":"g","values":[-1,0.75,0.2]}]}"#,
    )
    .unwrap();
}

fn run_cli(dir: &Path, threads: usize, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_genbound"))
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .env_remove("GENBOUND_SEED")
        .args(["--format", "json", "--seed", "12345", "--replicas", "2000"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let commands: &[&[&str]] = &[
        &["chain", "analyze", "chain.json"],
        &["chain", "sample", "chain.json", "--n", "500"],
        &["complexity", "rademacher", "--chain", "chain.json", "--class", "class.json", "--n", "32"],
        &["complexity", "gaussian", "--chain", "chain.json", "--class", "class.json", "--n", "32"],
        &["bound", "thm1", "--chain", "chain.json", "--class", "class.json", "--n", "128"],
        &["bound", "two-sided", "--chain", "chain.json", "--class", "class.json", "--n", "128"],
        &["margins", "distribution", "--chain", "chain.json", "--class", "class.json", "--n", "64"],
        &["reduce", "arma", "--a", "0.5,-0.2", "--theta", "0.3"],
        &["verify", "symmetrization", "--chain", "chain.json", "--class", "class.json", "--n", "32"],
        &["verify", "mcdiarmid", "--chain", "chain.json", "--f", "1,-1,0.5", "--n", "32", "--t", "0.1,0.3"],
        &["verify", "tail", "--target", "two-sided", "--chain", "chain.json", "--class", "class.json", "--n", "32"],
    ];
    let mut differing = Vec::new();
    for args in commands {
        let first = run_cli(dir.path(), 1, args);
        let again = run_cli(dir.path(), 1, args);
        let wide = run_cli(dir.path(), 4, args);
        if first != again || first != wide || first.is_empty() {
            differing.push(args.join(" "));
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} commands x (repeat, 1 vs 4 workers); differing {differing:?}", commands.len()),
    )
}

fn main() -> ExitCode {
    type Criterion = (usize, &'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 11] = [
        (1, "spectral exactness", spectral_exactness, Duration::from_secs(1)),
        (2, "mixing identities", mixing_identities, Duration::from_secs(5)),
        (3, "complexity oracle equivalence", complexity_oracle, Duration::from_secs(120)),
        (4, "symmetrization sandwich", symmetrization_sandwich, Duration::from_secs(600)),
        (5, "replica identity", replica_identity, Duration::from_secs(60)),
        (6, "theorem-tail verification", theorem_tail, Duration::from_secs(900)),
        (7, "concentration lemmas", concentration, Duration::from_secs(600)),
        (8, "reduction equivalence", reductions, Duration::from_secs(10)),
        (9, "formula self-consistency", formula_consistency, Duration::from_secs(600)),
        (10, "gamma-margin and Levy", margin_and_levy, Duration::from_secs(600)),
        (11, "determinism", determinism, Duration::from_secs(600)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, run, limit) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let o = within_time(o, elapsed, limit);
        let known = KNOWN_FAILING.contains(&id);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known)",
            (true, true) => "PASS (unexpected)",
        };
        println!("criterion {id:>2} {name}: {tag} [{:.2}s] {}", elapsed.as_secs_f64(), o.detail);
        if o.pass == known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcomes for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
