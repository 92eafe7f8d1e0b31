//! One function per subcommand, each returning the report payload.

use std::path::Path;

use genbound_core::analysis::AnalysisOptions;
use genbound_core::bounds::{
    bound_bayes, bound_deep_adaptive, bound_deep_layered, bound_family, bound_levy, bound_pac_vc, bound_sup_cdf,
    bound_thm1, bound_two_sided, dyadic_grid, dyadic_ramp_family, gamma_margin, levy_distance, AdaptiveCapacity,
    MarkovConstants, PriorAverage, Sample, StepCdf,
};
use genbound_core::chain::{
    estimate_kernel, lift_prior_product, sample_trajectory, stationary, ChainFile, LoadedChain, Start,
};
use genbound_core::deepnet::{capacity, network_margins, Labels, NetworkSpec};
use genbound_core::empirical::{
    chain_for_start, empirical_rademacher, exact_cost, gaussian_complexity, rademacher_complexity, ComplexityEstimate,
    EXACT_CAP,
};
use genbound_core::mixing::gap_mixing_bracket;
use genbound_core::reduce::{
    affine_lift, arma_lift, companion_lift, discretize_ar, gaussian_noise, max_deviation, mixture_indicator_check,
    mixture_lift, simulate_arma, simulate_arma_lifted, simulate_lifted, simulate_linear,
};
use genbound_core::rng::{derive_seed, stream};
use genbound_core::verify::{
    verify_mcdiarmid, verify_replica_identity, verify_symmetrization, verify_theorem_tail, verify_variance, Statistic,
};
use genbound_core::{ChainAnalysis, ChainSpec, FunctionClass, MarginLoss, Trajectory};
use serde_json::{json, Map, Value};

use crate::inputs::{self, CliResult, Failure};
use crate::output::{to_json_string, to_value};
use crate::*;

/// Number of `d(t)` values echoed by `chain analyze`.
const PROFILE_ECHO: usize = 50;
/// Sub-seed tags so trajectories and complexity replicas never share streams.
const TAG_COMPLEXITY: u64 = 1;
const TAG_NOISE: u64 = 2;

pub fn run(cli: &Cli) -> CliResult<(String, Value)> {
    let g = Globals {
        seed: cli.seed,
        replicas: cli.replicas,
    };
    match &cli.command {
        Command::Chain(c) => match c {
            ChainCmd::Analyze(a) => named("chain analyze", chain_analyze(a)),
            ChainCmd::Sample(a) => named("chain sample", chain_sample(&g, a)),
            ChainCmd::Estimate(a) => named("chain estimate", chain_estimate(a)),
        },
        Command::Complexity(c) => match c {
            ComplexityCmd::Rademacher(a) => named("complexity rademacher", complexity(&g, a, false)),
            ComplexityCmd::Gaussian(a) => named("complexity gaussian", complexity(&g, a, true)),
        },
        Command::Bound(b) => match b {
            BoundCmd::Thm1(a) => named("bound thm1", bound_margin(&g, a, MarginKind::Thm1)),
            BoundCmd::TwoSided(a) => named("bound two-sided", bound_margin(&g, a, MarginKind::TwoSided)),
            BoundCmd::Levy(a) => named("bound levy", bound_margin(&g, a, MarginKind::Levy)),
            BoundCmd::Family(a) => named("bound family", bound_family_cmd(&g, a)),
            BoundCmd::PacVc(a) => named("bound pac-vc", bound_pac_vc_cmd(&g, a)),
            BoundCmd::DeepLayered(a) => named("bound deep-layered", bound_deep(&g, a, false)),
            BoundCmd::DeepAdaptive(a) => named("bound deep-adaptive", bound_deep(&g, a, true)),
            BoundCmd::Bayes(a) => named("bound bayes", bound_bayes_cmd(&g, a)),
            BoundCmd::SupCdf(a) => named("bound sup-cdf", bound_sup_cdf_cmd(a)),
            BoundCmd::GammaMargin(a) => named("bound gamma-margin", bound_gamma_margin(&g, a)),
        },
        Command::Margins(m) => match m {
            MarginsCmd::LevyDistance(a) => named("margins levy-distance", margins_levy(a)),
            MarginsCmd::Distribution(a) => named("margins distribution", margins_distribution(&g, a)),
        },
        Command::Reduce(r) => match r {
            ReduceCmd::Companion(a) => named("reduce companion", reduce_companion(a)),
            ReduceCmd::Affine(a) => named("reduce affine", reduce_affine(a)),
            ReduceCmd::Arma(a) => named("reduce arma", reduce_arma(&g, a)),
            ReduceCmd::Mixture(a) => named("reduce mixture", reduce_mixture(&g, a)),
        },
        Command::Verify(v) => match v {
            VerifyCmd::Symmetrization(a) => named("verify symmetrization", verify_sym(&g, a)),
            VerifyCmd::Variance(a) => named("verify variance", verify_var(&g, a)),
            VerifyCmd::Mcdiarmid(a) => named("verify mcdiarmid", verify_mcd(&g, a)),
            VerifyCmd::Tail(a) => named("verify tail", verify_tail(&g, a)),
            VerifyCmd::ReplicaIdentity(a) => named("verify replica-identity", verify_replica(&g, a)),
        },
    }
}

struct Globals {
    seed: u64,
    replicas: usize,
}

fn named(name: &str, r: CliResult<Value>) -> CliResult<(String, Value)> {
    r.map(|v| (name.to_string(), v))
}

fn opts(a: &AnalysisFlags) -> AnalysisOptions {
    AnalysisOptions {
        convention: a.convention,
        guard: a.guard,
        horizon: a.horizon,
    }
}

fn insert(map: &mut Map<String, Value>, key: &str, v: impl serde::Serialize) {
    map.insert(key.into(), to_value(&v));
}

fn chain_analyze(a: &AnalyzeArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let chain = &loaded.chain;
    let an = ChainAnalysis::new(chain, opts(&a.analysis))?;
    let sp = &an.spectral;
    let mut m = Map::new();
    insert(&mut m, "states", chain.states());
    insert(&mut m, "pi", &sp.pi);
    insert(&mut m, "pi_star", sp.pi_star);
    insert(&mut m, "irreducible", sp.irreducible);
    insert(&mut m, "reversible", sp.reversible);
    insert(&mut m, "period", sp.period);
    insert(&mut m, "lambda", an.lambda);
    insert(&mut m, "gamma_star", an.gamma_star);
    insert(&mut m, "spectrum", &sp.spectrum);
    insert(&mut m, "chi_div_pi_weighted", sp.chi_div_pi_weighted);
    insert(&mut m, "chi_div_unweighted", sp.chi_div_unweighted);
    insert(&mut m, "in_m2", sp.in_m2);
    let echo: Vec<f64> = an.profile.d_values.iter().take(PROFILE_ECHO).copied().collect();
    insert(&mut m, "d_profile", echo);
    insert(&mut m, "horizon", an.profile.horizon);
    insert(&mut m, "converged", an.profile.converged);
    insert(&mut m, "t_mix", an.t_mix);
    insert(&mut m, "tau_min_guarded", an.tau_min_guarded);
    insert(&mut m, "tau_min_literal", an.tau_min_literal);
    insert(&mut m, "tau_min_exact", an.tau_min_exact);
    insert(&mut m, "guard", an.guard);
    match gap_mixing_bracket(an.gamma_star, sp.pi_star) {
        Ok((lo, hi)) => insert(&mut m, "t_mix_bracket", [lo, hi]),
        Err(_) => insert(&mut m, "t_mix_bracket", Value::Null),
    }
    Ok(Value::Object(m))
}

fn chain_sample(g: &Globals, a: &SampleArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let chain = if a.labelled { loaded.labelled_chain()? } else { loaded.chain.clone() };
    let start_chain = match a.start {
        Start::Initial => chain.clone(),
        Start::Stationary => chain.with_initial(&stationary(&chain)?.pi)?,
    };
    let traj = sample_trajectory(&start_chain, a.n, g.seed)?;
    let mut m = match to_value(&traj) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    insert(&mut m, "states", chain.states());
    insert(&mut m, "start", a.start);
    insert(&mut m, "counts", traj.counts());
    Ok(Value::Object(m))
}

fn chain_estimate(a: &EstimateArgs) -> CliResult<Value> {
    let traj = inputs::trajectory(&a.trajectory)?;
    let est = estimate_kernel(&traj, a.smoothing)?;
    let mut m = match to_value(&ChainFile::from_chain(&est.chain)) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    insert(&mut m, "unvisited_rows", &est.unvisited_rows);
    insert(&mut m, "smoothing", a.smoothing);
    insert(&mut m, "n", traj.len());
    Ok(Value::Object(m))
}

/// The chain a class lives on: the labelled lift for labelled classes.
fn class_chain(loaded: &LoadedChain, class: &FunctionClass) -> CliResult<ChainSpec> {
    let chain = if class.labeled() { loaded.labelled_chain()? } else { loaded.chain.clone() };
    class.check_states(chain.n_states())?;
    Ok(chain)
}

fn start_chain(chain: &ChainSpec, start: Start) -> CliResult<ChainSpec> {
    match start {
        Start::Initial => Ok(chain.clone()),
        Start::Stationary => Ok(chain_for_start(chain, start, &stationary(chain)?)?),
    }
}

fn use_exact(mode: ExactMode, chain: &ChainSpec, n: usize) -> bool {
    match mode {
        ExactMode::Always => true,
        ExactMode::Never => false,
        ExactMode::Auto => exact_cost(chain.n_states(), n) <= EXACT_CAP,
    }
}

fn complexity(g: &Globals, a: &ComplexityArgs, gaussian: bool) -> CliResult<Value> {
    let loaded = inputs::chain(&a.source.chain)?;
    let class = inputs::class(&a.source.class)?;
    let chain = class_chain(&loaded, &class)?;
    let est = match (&a.trajectory, gaussian) {
        (Some(path), false) => {
            let traj = inputs::trajectory(path)?;
            empirical_rademacher(&class, &traj, g.replicas, g.seed)?
        }
        (Some(_), true) => return Err(Failure::arg("trajectory", "conditional complexity is Rademacher only")),
        (None, true) => {
            if a.exact == ExactMode::Always {
                return Err(Failure::arg("exact", "Gaussian complexity has no exact mode"));
            }
            gaussian_complexity(&class, &start_chain(&chain, a.source.start)?, a.source.n, g.replicas, g.seed)?
        }
        (None, false) => {
            let sc = start_chain(&chain, a.source.start)?;
            let exact = use_exact(a.exact, &sc, a.source.n);
            rademacher_complexity(&class, &sc, a.source.n, g.replicas, g.seed, exact)?
        }
    };
    let mut m = match to_value(&est) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    insert(&mut m, "start", a.source.start);
    insert(&mut m, "conditional", a.trajectory.is_some());
    Ok(Value::Object(m))
}

/// Everything a margin bound needs: class, chain constants, a path and a complexity.
struct BoundInputs {
    class: FunctionClass,
    analysis: ChainAnalysis,
    constants: MarkovConstants,
    traj: Trajectory,
    sample: Sample,
    chain: ChainSpec,
}

fn observed(g: &Globals, chain: &ChainSpec, start: Start, n: usize, path: Option<&Path>) -> CliResult<Trajectory> {
    match path {
        Some(p) => {
            let t = inputs::trajectory(p)?;
            if t.n_states != chain.n_states() {
                return Err(Failure::parse(
                    "trajectory.n_states",
                    format!("trajectory has {} states, chain has {}", t.n_states, chain.n_states()),
                ));
            }
            Ok(t)
        }
        None => Ok(sample_trajectory(&start_chain(chain, start)?, n, g.seed)?),
    }
}

fn bound_inputs(g: &Globals, c: &BoundCommon) -> CliResult<BoundInputs> {
    let loaded = inputs::chain(&c.source.chain)?;
    let class = inputs::class(&c.source.class)?;
    let chain = class_chain(&loaded, &class)?;
    let analysis = ChainAnalysis::new(&chain, opts(&c.analysis))?;
    analysis.require_gap()?;
    let traj = observed(g, &chain, c.source.start, c.source.n, c.trajectory.as_deref())?;
    let constants = MarkovConstants::from_analysis(&analysis, traj.len())?;
    let sample = Sample::new(&traj, Some(analysis.pi()));
    Ok(BoundInputs {
        class,
        analysis,
        constants,
        traj,
        sample,
        chain,
    })
}

fn shared_complexity(g: &Globals, chain: &ChainSpec, class: &FunctionClass, start: Start, n: usize, mode: ExactMode, gaussian: bool) -> CliResult<ComplexityEstimate> {
    let sc = start_chain(chain, start)?;
    let seed = derive_seed(g.seed, TAG_COMPLEXITY);
    if gaussian {
        Ok(gaussian_complexity(class, &sc, n, g.replicas, seed)?)
    } else {
        let exact = use_exact(mode, &sc, n);
        Ok(rademacher_complexity(class, &sc, n, g.replicas, seed, exact)?)
    }
}

fn load_loss(path: Option<&Path>) -> CliResult<MarginLoss> {
    match path {
        None => Ok(MarginLoss::ramp_upper()),
        Some(p) => {
            let knots: Vec<[f64; 2]> = serde_json::from_str(&inputs::read(p)?).map_err(|e| Failure::parse("loss", e.to_string()))?;
            Ok(MarginLoss::table(knots)?)
        }
    }
}

enum MarginKind {
    Thm1,
    TwoSided,
    Levy,
}

fn with_trajectory_seed(report: Value, traj: &Trajectory, from_file: bool) -> Value {
    let mut m = match report {
        Value::Object(m) => m,
        other => return other,
    };
    insert(&mut m, "trajectory_seed", if from_file { None } else { Some(traj.seed) });
    Value::Object(m)
}

fn bound_margin(g: &Globals, a: &MarginBoundArgs, kind: MarginKind) -> CliResult<Value> {
    let c = &a.common;
    let bi = bound_inputs(g, c)?;
    let grid = dyadic_grid(c.levels);
    let gaussian = matches!(a.flavor, genbound_core::bounds::Flavor::Gaussian) && matches!(kind, MarginKind::Thm1);
    let cx = shared_complexity(g, &bi.chain, &bi.class, c.source.start, bi.traj.len(), c.exact, gaussian)?;
    let report = match kind {
        MarginKind::Thm1 => {
            let phi = load_loss(a.loss.as_deref())?;
            bound_thm1(&bi.class, &bi.sample, &bi.constants, &cx, &phi, c.t, &grid, a.flavor)?
        }
        MarginKind::TwoSided => bound_two_sided(&bi.class, &bi.sample, &bi.constants, &cx, c.t, &grid)?,
        MarginKind::Levy => {
            let mut r = bound_levy(&bi.constants, cx.value, bi.class.m(), c.t)?;
            let observed = observed_levy(&bi.class, &bi.sample.law, bi.analysis.pi())?;
            r.extras.insert("observed_sup_levy".into(), to_value(&observed));
            r
        }
    };
    Ok(with_trajectory_seed(to_value(&report), &bi.traj, c.trajectory.is_some()))
}

fn observed_levy(class: &FunctionClass, law: &[f64], pi: &[f64]) -> CliResult<f64> {
    let mut sup = 0.0f64;
    for f in class.values() {
        sup = sup.max(levy_distance(&StepCdf::from_masses(f, pi)?, &StepCdf::from_masses(f, law)?));
    }
    Ok(sup)
}

fn bound_family_cmd(g: &Globals, a: &FamilyArgs) -> CliResult<Value> {
    let c = &a.common;
    let bi = bound_inputs(g, c)?;
    let cx = shared_complexity(g, &bi.chain, &bi.class, c.source.start, bi.traj.len(), c.exact, false)?;
    let phis = dyadic_ramp_family(a.family);
    let report = bound_family(&bi.class, &bi.sample, &bi.constants, &cx, &phis, c.t)?;
    Ok(with_trajectory_seed(to_value(&report), &bi.traj, c.trajectory.is_some()))
}

fn bound_pac_vc_cmd(g: &Globals, a: &PacVcArgs) -> CliResult<Value> {
    let c = &a.common;
    let bi = bound_inputs(g, c)?;
    let report = bound_pac_vc(&bi.class, &bi.sample, &bi.constants, a.vc, a.c, a.alpha, &dyadic_grid(c.levels))?;
    Ok(with_trajectory_seed(to_value(&report), &bi.traj, c.trajectory.is_some()))
}

/// Margins of the network output and the chain they live on.
fn network_setup(loaded: &LoadedChain, net: &NetworkSpec, labels: Option<&[f64]>) -> CliResult<(FunctionClass, ChainSpec)> {
    match (labels, &loaded.emission) {
        (Some(ys), _) => Ok((network_margins(net, &Labels::PerState(ys.to_vec()))?, loaded.chain.clone())),
        (None, Some(_)) => {
            let names = loaded
                .labels
                .clone()
                .ok_or_else(|| Failure::arg("labels", "emission matrix has no labels"))?;
            let ys = inputs::numeric_labels(&names)?;
            Ok((network_margins(net, &Labels::Lifted(ys))?, loaded.labelled_chain()?))
        }
        (None, None) => Err(Failure::arg("labels", "give --labels or a chain with an emission matrix")),
    }
}

fn bound_deep(g: &Globals, a: &DeepArgs, adaptive: bool) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let net = inputs::network(&a.network)?;
    net.base().check_states(loaded.chain.n_states())?;
    let (margins, chain) = network_setup(&loaded, &net, a.labels.as_deref())?;
    let analysis = ChainAnalysis::new(&chain, opts(&a.analysis))?;
    analysis.require_gap()?;
    let traj = observed(g, &chain, Start::Initial, a.n, a.trajectory.as_deref())?;
    let n = traj.len();
    let constants = MarkovConstants::from_analysis(&analysis, n)?;
    let sample = Sample::new(&traj, Some(analysis.pi()));
    // base functions act on the observation chain
    let g_base = gaussian_complexity(net.base(), &loaded.chain, n, g.replicas, derive_seed(g.seed, TAG_COMPLEXITY))?;
    let cap = capacity(&net, a.alpha)?;
    let phi = MarginLoss::ramp_upper();
    let grid = dyadic_grid(a.levels);
    let mut report = if adaptive {
        let ac = AdaptiveCapacity {
            lambda_f: cap.lambda_f,
            gamma_alpha: cap.gamma_alpha,
            alpha: a.alpha,
        };
        bound_deep_adaptive(&margins, &sample, &constants, &ac, &g_base, &phi, a.t, &grid)?
    } else {
        bound_deep_layered(&margins, &sample, &constants, &cap.lipschitz, &cap.w_k, &g_base, &phi, a.t, &grid)?
    };
    report.extras.insert("capacity".into(), to_value(&cap));
    if !cap.floored_layers.is_empty() {
        report
            .caveats
            .push(format!("W_k below 1/2 raised to 1/2 inside log2 for layers {:?}", cap.floored_layers));
    }
    Ok(with_trajectory_seed(to_value(&report), &traj, a.trajectory.is_some()))
}

fn bound_bayes_cmd(g: &Globals, a: &BayesArgs) -> CliResult<Value> {
    let c = &a.common;
    let loaded = inputs::chain(&c.source.chain)?;
    let class = inputs::class(&c.source.class)?;
    let base = loaded.chain.clone();
    let lifted = lift_prior_product(&base, &a.prior)?;
    class.check_states(lifted.n_states())?;
    let analysis = ChainAnalysis::new(&lifted, opts(&c.analysis))?;
    analysis.require_gap()?;
    let traj = observed(g, &base, c.source.start, c.source.n, c.trajectory.as_deref())?;
    let n = traj.len();
    let constants = MarkovConstants::from_analysis(&analysis, n)?;
    let gaussian = matches!(a.flavor, genbound_core::bounds::Flavor::Gaussian);
    let cx = shared_complexity(g, &lifted, &class, c.source.start, n, c.exact, gaussian)?;
    let average = match a.w_samples {
        None => PriorAverage::Exact,
        Some(samples) => PriorAverage::MonteCarlo {
            samples,
            seed: derive_seed(g.seed, TAG_NOISE),
        },
    };
    let report = bound_bayes(
        &class,
        &traj,
        &a.prior,
        &constants,
        &cx,
        &MarginLoss::ramp_upper(),
        c.t,
        &dyadic_grid(c.levels),
        a.flavor,
        average,
        Some(analysis.pi()),
    )?;
    Ok(with_trajectory_seed(to_value(&report), &traj, c.trajectory.is_some()))
}

fn bound_sup_cdf_cmd(a: &SupCdfArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let analysis = ChainAnalysis::new(&loaded.chain, opts(&a.analysis))?;
    analysis.require_gap()?;
    let constants = MarkovConstants::from_analysis(&analysis, a.n)?;
    Ok(to_value(&bound_sup_cdf(&constants, a.t)?))
}

fn bound_gamma_margin(g: &Globals, a: &GammaMarginArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.source.chain)?;
    let class = inputs::class(&a.source.class)?;
    let chain = class_chain(&loaded, &class)?;
    let pi = stationary(&chain)?.pi;
    let traj = observed(g, &chain, a.source.start, a.source.n, a.trajectory.as_deref())?;
    let n = traj.len();
    let law = traj.empirical_law();
    let mut rows = Vec::new();
    for (name, f) in class.names().iter().zip(class.values()) {
        let empirical = gamma_margin(f, &law, a.gamma, n)?;
        let population = gamma_margin(f, &pi, a.gamma, n)?;
        rows.push(json!({
            "name": name,
            "empirical": to_value(&empirical),
            "population": to_value(&population),
            "ratio": to_value(&(population / empirical)),
        }));
    }
    let mut m = Map::new();
    insert(&mut m, "gamma", a.gamma);
    insert(&mut m, "n", n);
    m.insert("functions".into(), Value::Array(rows));
    Ok(with_trajectory_seed(Value::Object(m), &traj, a.trajectory.is_some()))
}

fn margins_levy(a: &LevyDistanceArgs) -> CliResult<Value> {
    let f = inputs::step_cdf(&a.a, "a")?;
    let g = inputs::step_cdf(&a.b, "b")?;
    let mut m = Map::new();
    insert(&mut m, "levy_distance", levy_distance(&f, &g));
    Ok(Value::Object(m))
}

fn sup_gap(a: &StepCdf, b: &StepCdf) -> f64 {
    let mut xs: Vec<f64> = a.jumps().iter().chain(b.jumps()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.iter()
        .flat_map(|&x| [(a.eval(x) - b.eval(x)).abs(), (a.eval_left(x) - b.eval_left(x)).abs()])
        .fold(0.0, f64::max)
}

fn margins_distribution(g: &Globals, a: &DistributionArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.source.chain)?;
    let class = inputs::class(&a.source.class)?;
    let chain = class_chain(&loaded, &class)?;
    let pi = stationary(&chain)?.pi;
    let traj = observed(g, &chain, a.source.start, a.source.n, a.trajectory.as_deref())?;
    let law = traj.empirical_law();
    let mut rows = Vec::new();
    for (name, f) in class.names().iter().zip(class.values()) {
        let pop = StepCdf::from_masses(f, &pi)?;
        let emp = StepCdf::from_masses(f, &law)?;
        rows.push(json!({
            "name": name,
            "points": to_value(pop.jumps()),
            "population_cdf": to_value(&pop.jumps().iter().map(|&x| pop.eval(x)).collect::<Vec<_>>()),
            "empirical_cdf": to_value(&pop.jumps().iter().map(|&x| emp.eval(x)).collect::<Vec<_>>()),
            "levy_distance": to_value(&levy_distance(&pop, &emp)),
            "sup_distance": to_value(&sup_gap(&pop, &emp)),
        }));
    }
    let mut m = Map::new();
    insert(&mut m, "n", traj.len());
    m.insert("functions".into(), Value::Array(rows));
    Ok(with_trajectory_seed(Value::Object(m), &traj, a.trajectory.is_some()))
}

fn default_init(init: &Option<Vec<f64>>, m: usize) -> CliResult<Vec<f64>> {
    match init {
        Some(v) if v.len() < m => Err(Failure::arg("init", format!("need {m} initial values, got {}", v.len()))),
        Some(v) => Ok(v.clone()),
        None => Ok(vec![1.0; m]),
    }
}

fn linear_report(lift: &genbound_core::reduce::CompanionLift, c: f64, init: &[f64], steps: usize) -> Value {
    let direct = simulate_linear(&lift.coefficients, c, init, steps);
    let lifted = simulate_lifted(lift, init, steps);
    let mut m = match to_value(lift) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    insert(&mut m, "determinant", lift.g.determinant());
    insert(&mut m, "steps", steps);
    insert(&mut m, "max_deviation", max_deviation(&direct, &lifted));
    Value::Object(m)
}

fn reduce_companion(a: &CompanionArgs) -> CliResult<Value> {
    let lift = companion_lift(&a.a)?;
    let init = default_init(&a.init, lift.order)?;
    Ok(linear_report(&lift, 0.0, &init, a.steps))
}

fn reduce_affine(a: &AffineArgs) -> CliResult<Value> {
    let lift = affine_lift(&a.a, a.c)?;
    let init = default_init(&a.init, lift.order)?;
    Ok(linear_report(&lift, a.c, &init, a.steps))
}

fn reduce_arma(g: &Globals, a: &ArmaArgs) -> CliResult<Value> {
    // a pure AR model is the q = 1 lift with a zero MA coefficient
    let theta = if a.theta.is_empty() { vec![0.0] } else { a.theta.clone() };
    let lift = arma_lift(a.c, &a.a, &theta)?;
    let noise = gaussian_noise(&mut stream(derive_seed(g.seed, TAG_NOISE), 0), a.sigma, a.steps);
    let init = vec![lift.offset; a.a.len()];
    let direct = simulate_arma(a.c, &a.a, &theta, &init, &noise);
    let lifted = simulate_arma_lifted(&lift, &init, &noise);
    let mut m = match to_value(&lift) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    insert(&mut m, "steps", a.steps);
    insert(&mut m, "sigma", a.sigma);
    insert(&mut m, "max_deviation", max_deviation(&direct, &lifted));
    if let Some(bins) = a.bins {
        let range = match a.range.as_deref() {
            Some([lo, hi]) => [*lo, *hi],
            Some(_) => return Err(Failure::arg("range", "expected lo,hi")),
            None => {
                let half = 4.0 * a.sigma;
                [lift.offset - half, lift.offset + half]
            }
        };
        if a.theta.iter().any(|t| *t != 0.0) {
            return Err(Failure::arg("bins", "discretization covers the AR part only; theta must be zero"));
        }
        let d = discretize_ar(a.c, &a.a, a.sigma, range, bins)?;
        let mut dm = match to_value(&d) {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        insert(&mut dm, "n_states", d.chain.n_states());
        if let Some(path) = &a.chain_out {
            let text = to_json_string(&ChainFile::from_chain(&d.chain));
            std::fs::write(path, text + "\n").map_err(|e| Failure::io(path, e))?;
            insert(&mut dm, "chain_file", path.display().to_string());
        }
        m.insert("discretization".into(), Value::Object(dm));
    }
    Ok(Value::Object(m))
}

fn reduce_mixture(g: &Globals, a: &MixtureArgs) -> CliResult<Value> {
    let kernels: Vec<ChainSpec> = a
        .chains
        .iter()
        .map(|p| inputs::chain(p).map(|l| l.chain))
        .collect::<CliResult<_>>()?;
    let lift = mixture_lift(&kernels, &a.alphas, None)?;
    let threshold = a.threshold;
    let check = mixture_indicator_check(&lift, |y| y - threshold <= 0.0, a.steps, g.seed);
    let mut m = match to_value(&lift) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    insert(&mut m, "threshold", threshold);
    insert(&mut m, "check", &check);
    insert(&mut m, "identity_holds", check.direct_count == check.lifted_count);
    Ok(Value::Object(m))
}

fn verify_sym(g: &Globals, a: &VerifyClassArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let class = inputs::class(&a.class)?;
    let chain = class_chain(&loaded, &class)?;
    Ok(to_value(&verify_symmetrization(&chain, &class, a.n, g.replicas, g.seed, opts(&a.analysis))?))
}

fn verify_var(g: &Globals, a: &VarianceArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    Ok(to_value(&verify_variance(&loaded.chain, &a.f, a.n, a.n0, g.replicas, g.seed, opts(&a.analysis))?))
}

fn verify_mcd(g: &Globals, a: &McdiarmidArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let stat = Statistic::Mean { f: a.f.clone() };
    Ok(to_value(&verify_mcdiarmid(
        &loaded.chain,
        &stat,
        a.c.as_deref(),
        a.n,
        &a.t,
        g.replicas,
        g.seed,
        a.guard,
    )?))
}

fn verify_tail(g: &Globals, a: &TailArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let class = inputs::class(&a.class)?;
    let chain = class_chain(&loaded, &class)?;
    Ok(to_value(&verify_theorem_tail(a.target, &chain, &class, a.n, a.t, g.replicas, g.seed, opts(&a.analysis))?))
}

fn verify_replica(g: &Globals, a: &ReplicaArgs) -> CliResult<Value> {
    let loaded = inputs::chain(&a.chain)?;
    let class = inputs::class(&a.class)?;
    let chain = class_chain(&loaded, &class)?;
    Ok(to_value(&verify_replica_identity(&chain, &class, a.n, g.replicas, g.seed)?))
}
