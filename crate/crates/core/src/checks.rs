//! The verification suite.
//!
//! Each function here runs one numbered suite of the project's acceptance
//! gate over seeded random fixtures and returns a [`CheckOutcome`] with a
//! one-line summary. The `check` CLI subcommand runs them all and exits
//! nonzero on any failure; the `acceptance` integration test asserts each
//! one individually. Suites that emit CSV artifacts attach them so
//! byte-level determinism can be verified by re-running with the same
//! seed.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distribution::{
    kolmogorov_distance, Distribution, PerturbMode, PerturbationSpec, BALL_SLACK,
};
use crate::policy::{
    capped_benchmark, conditional_utility, expected_utility_exact, expected_utility_mc, run_policy,
    walk_utility, CompensatedSum, ThresholdPolicy,
};
use crate::reservation::{
    capped_value, expected_excess, reservation_price, thresholds, Instance, SearchBox,
};
use crate::robustness::{
    mix_seed, random_instance, regret, reports_to_csv, run_sweep, InstanceFamily, SweepConfig,
};

/// Seed used by the shipped corpus (`pandora check` and the acceptance
/// test run with this unless told otherwise).
pub const DEFAULT_SEED: u64 = 42;

/// Result of one verification suite.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
    /// CSV artifact for suites that emit one (byte-deterministic per seed).
    pub csv: Option<String>,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{}: {} ({} ms; {})",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.millis,
            self.detail
        )
    }
}

fn outcome(
    name: &'static str,
    started: Instant,
    passed: bool,
    detail: String,
    csv: Option<String>,
) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
        millis: started.elapsed().as_millis(),
        csv,
    }
}

/// Random piecewise-linear CDF: 2-5 knots, sometimes an atom at zero,
/// mean bounded away from zero.
fn random_pwl_dist<R: Rng + ?Sized>(rng: &mut R) -> Distribution {
    loop {
        let interior = rng.random_range(0..=3usize);
        let mut values = vec![0.0, 1.0];
        for _ in 0..interior {
            values.push(rng.random::<f64>());
        }
        values.sort_by(f64::total_cmp);
        if values.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        let base = if rng.random::<f64>() < 0.3 {
            0.3 * rng.random::<f64>()
        } else {
            0.0
        };
        let mut cdf = vec![base];
        for _ in 1..values.len() {
            let prev = *cdf.last().expect("nonempty");
            cdf.push(prev + rng.random::<f64>());
        }
        let last = *cdf.last().expect("nonempty");
        if last <= base {
            continue;
        }
        let scale = (1.0 - base) / (last - base);
        let knots: Vec<(f64, f64)> = values
            .iter()
            .zip(&cdf)
            .map(|(&v, &f)| (v, base + (f - base) * scale))
            .enumerate()
            .map(|(i, (v, f))| {
                if i == values.len() - 1 {
                    (v, 1.0)
                } else {
                    (v, f)
                }
            })
            .collect();
        let d = Distribution::pwl_cdf(knots).expect("generated knots are valid");
        if d.mean() >= 0.05 {
            return d;
        }
    }
}

fn random_mixed_dist<R: Rng + ?Sized>(rng: &mut R) -> Distribution {
    if rng.random::<f64>() < 0.5 {
        crate::robustness::random_discrete_dist(rng)
    } else {
        random_pwl_dist(rng)
    }
}

/// Suite 1: reservation solver residuals on random (law, cost) pairs plus
/// the two pinned closed-form examples.
pub fn check_reservation_solver(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 1]));
    let mut max_residual = 0.0f64;
    let pairs = 250;
    for _ in 0..pairs {
        let d = random_mixed_dist(&mut rng);
        let cost = rng.random::<f64>() * d.mean();
        let sigma = match reservation_price(&d, cost) {
            Ok(s) => s,
            Err(e) => {
                return outcome(
                    "reservation solver",
                    started,
                    false,
                    format!("solver error: {e}"),
                    None,
                )
            }
        };
        let residual = (expected_excess(&d, sigma) - cost).abs();
        max_residual = max_residual.max(residual);
    }
    let uniform_sigma = reservation_price(&Distribution::uniform(), 0.125).expect("valid cost");
    let bern = Distribution::bernoulli(0.5).expect("valid parameter");
    let bern_sigma = reservation_price(&bern, 0.25).expect("valid cost");
    let pinned_err = (uniform_sigma - 0.5).abs().max((bern_sigma - 0.5).abs());
    let passed = max_residual <= 1e-10 && pinned_err <= 1e-10;
    outcome(
        "reservation solver",
        started,
        passed,
        format!("{pairs} pairs, max residual {max_residual:.3e}, pinned error {pinned_err:.3e}"),
        None,
    )
}

fn equality_suite_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 2]));
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=4usize);
            random_instance(InstanceFamily::RandomDiscrete, n, &mut rng)
        })
        .collect()
}

/// Suite 2: the reservation-price policy's exact expected utility equals
/// the capped-value benchmark on random discrete instances.
pub fn check_capped_equality(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let instances = equality_suite_instances(seed, 500);
    let mut max_gap = 0.0f64;
    for inst in &instances {
        let policy = ThresholdPolicy::from_instance(inst);
        let exact = expected_utility_exact(&policy, inst).expect("discrete instance");
        let capped = capped_benchmark(inst).expect("discrete instance");
        max_gap = max_gap.max((exact - capped).abs());
    }
    outcome(
        "capped-value equality",
        started,
        max_gap <= 1e-9,
        format!(
            "{} instances, max |exact - capped| {max_gap:.3e}",
            instances.len()
        ),
        None,
    )
}

/// Suite 3: no perturbed threshold vector beats the reservation-price
/// policy under the exact oracle.
pub fn check_threshold_optimality(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let instances = equality_suite_instances(seed, 500);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 3]));
    let mut worst_violation = f64::NEG_INFINITY;
    for inst in &instances {
        let policy = ThresholdPolicy::from_instance(inst);
        let w_sigma = expected_utility_exact(&policy, inst).expect("discrete instance");
        for _ in 0..100 {
            let tau: Vec<f64> = policy
                .tau()
                .iter()
                .map(|t| t + 0.5 * (rng.random::<f64>() - 0.5))
                .collect();
            let perturbed = ThresholdPolicy::new(tau).expect("finite thresholds");
            let w_tau = expected_utility_exact(&perturbed, inst).expect("discrete instance");
            worst_violation = worst_violation.max(w_tau - w_sigma);
        }
    }
    outcome(
        "threshold optimality",
        started,
        worst_violation <= 1e-9,
        format!(
            "{} instances x 100 perturbations, worst W_tau - W_sigma {worst_violation:.3e}",
            instances.len()
        ),
        None,
    )
}

/// Suite 4: Monte Carlo agrees with the exact oracle within three standard
/// errors on at least 99% of instances. Emits a CSV artifact.
pub fn check_oracle_agreement(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 4]));
    let total = 100;
    let trials = 100_000;
    let mut csv = String::from("instance,n,exact,mc_mean,mc_stderr,trials\n");
    let mut agreeing = 0usize;
    for i in 0..total {
        let n = rng.random_range(1..=4usize);
        let inst = random_instance(InstanceFamily::RandomDiscrete, n, &mut rng);
        let policy = ThresholdPolicy::from_instance(&inst);
        let exact = expected_utility_exact(&policy, &inst).expect("discrete instance");
        let est = expected_utility_mc(&policy, &inst, trials, mix_seed(&[seed, 4, i as u64]))
            .expect("dimensions match");
        // Tiny absolute slack absorbs degenerate zero-variance cases where
        // the two sides differ only by summation order.
        if (est.mean - exact).abs() <= 3.0 * est.stderr + 1e-12 {
            agreeing += 1;
        }
        csv.push_str(&format!(
            "{i},{n},{exact},{},{},{trials}\n",
            est.mean, est.stderr
        ));
    }
    outcome(
        "oracle agreement",
        started,
        agreeing * 100 >= total * 99,
        format!("{agreeing}/{total} instances within 3 standard errors"),
        Some(csv),
    )
}

/// Whether the pinned box (index `prefix.len()`) gets opened given the
/// realized prefix, under thresholds sorted nonincreasing.
fn box_opened(tau: &[f64], prefix: &[f64]) -> bool {
    let mut best = 0.0f64;
    for (k, &v) in prefix.iter().enumerate() {
        if tau[k] <= best {
            return false;
        }
        if v > best {
            best = v;
        }
    }
    tau[prefix.len()] > best
}

/// Independent right-hand side of the conditional-utility decomposition:
/// `E[max(B(x), max_{j>i} kappa_j)] - sum_{j<=i} c_j`, evaluated from
/// capped values over the suffix product.
fn decomposition_rhs(inst: &Instance, sigma: &[f64], prefix: &[f64], x: f64) -> f64 {
    let i = prefix.len();
    let b_of_x = prefix.iter().fold(x, |acc, &v| acc.max(v));
    let paid: f64 = inst.costs()[..=i].iter().sum();
    let suffix: Vec<&[(f64, f64)]> = inst.boxes()[i + 1..]
        .iter()
        .map(|b| b.dist().atoms().expect("suite uses discrete laws"))
        .collect();
    let mut acc = CompensatedSum::default();
    let mut stack_value = vec![0.0f64; suffix.len()];
    enumerate_suffix(&suffix, 0, 1.0, &mut stack_value, &mut |values, w| {
        let mut m = b_of_x;
        for (k, &v) in values.iter().enumerate() {
            let kappa = capped_value(sigma[i + 1 + k], v);
            if kappa > m {
                m = kappa;
            }
        }
        acc.add(w * m);
    });
    acc.value() - paid
}

fn enumerate_suffix<F: FnMut(&[f64], f64)>(
    supports: &[&[(f64, f64)]],
    depth: usize,
    weight: f64,
    values: &mut Vec<f64>,
    f: &mut F,
) {
    if depth == supports.len() {
        f(values, weight);
        return;
    }
    for &(v, p) in supports[depth] {
        values[depth] = v;
        enumerate_suffix(supports, depth + 1, weight * p, values, f);
    }
}

/// Suite 5: the conditional utility `g` is nondecreasing and 1-Lipschitz
/// on a 0.01 grid, and satisfies the capped-value decomposition whenever
/// the pinned box is opened.
pub fn check_conditional_utility(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 5]));
    let configs = 100;
    let mut worst_monotone = f64::NEG_INFINITY;
    let mut worst_lipschitz = f64::NEG_INFINITY;
    let mut worst_decomposition = 0.0f64;
    let mut opened_configs = 0usize;
    for _ in 0..configs {
        let n = rng.random_range(1..=4usize);
        let inst = random_instance(InstanceFamily::RandomDiscrete, n, &mut rng);
        let sigma = thresholds(&inst);
        let policy = ThresholdPolicy::new(sigma.clone()).expect("finite thresholds");
        let i = rng.random_range(0..n);
        let prefix: Vec<f64> = (0..i).map(|_| rng.random::<f64>()).collect();
        let grid: Vec<f64> = (0..=100).map(|j| j as f64 / 100.0).collect();
        let g: Vec<f64> = grid
            .iter()
            .map(|&x| {
                conditional_utility(&policy, &inst, &prefix, x).expect("suite preconditions hold")
            })
            .collect();
        for w in g.windows(2) {
            worst_monotone = worst_monotone.max(w[0] - w[1]);
            worst_lipschitz = worst_lipschitz.max((w[1] - w[0]) - 0.01);
        }
        if box_opened(policy.tau(), &prefix) {
            opened_configs += 1;
            for (&x, &gx) in grid.iter().zip(&g) {
                let rhs = decomposition_rhs(&inst, &sigma, &prefix, x);
                worst_decomposition = worst_decomposition.max((gx - rhs).abs());
            }
        }
    }
    let passed = worst_monotone <= 1e-9 && worst_lipschitz <= 1e-9 && worst_decomposition <= 1e-9;
    outcome(
        "conditional utility shape",
        started,
        passed,
        format!(
            "{configs} configs ({opened_configs} with the pinned box opened), worst monotone violation {worst_monotone:.3e}, worst lipschitz excess {worst_lipschitz:.3e}, worst decomposition gap {worst_decomposition:.3e}"
        ),
        None,
    )
}

fn acceptance_sweep_config(seed: u64) -> SweepConfig {
    SweepConfig {
        n_values: vec![1, 2, 3, 4],
        epsilon_values: vec![0.01, 0.05, 0.1],
        instances_per_cell: 50,
        modes: vec![
            PerturbMode::ShiftDown,
            PerturbMode::ShiftUp,
            PerturbMode::RandomMix,
        ],
        seed,
        instance_family: InstanceFamily::RandomDiscrete,
    }
}

/// Suite 6: over the full sweep grid, the stability gap stays within
/// `n * epsilon` and each per-box hybrid gap within `epsilon`. Emits the
/// sweep CSV.
pub fn check_stability_sweep(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let config = acceptance_sweep_config(seed);
    let reports = match run_sweep(&config) {
        Ok(r) => r,
        Err(e) => {
            return outcome(
                "stability sweep",
                started,
                false,
                format!("sweep error: {e}"),
                None,
            )
        }
    };
    let mut worst_gap_excess = f64::NEG_INFINITY;
    let mut worst_box_excess = f64::NEG_INFINITY;
    let mut worst_telescope = f64::NEG_INFINITY;
    for r in &reports {
        worst_gap_excess = worst_gap_excess.max(r.stability_gap - r.bound);
        for g in &r.per_box_gaps {
            worst_box_excess = worst_box_excess.max(g - r.epsilon);
        }
        let total: f64 = r.per_box_gaps.iter().sum();
        worst_telescope = worst_telescope.max(r.stability_gap - total);
    }
    let passed = worst_gap_excess <= 1e-9 && worst_box_excess <= 1e-9 && worst_telescope <= 1e-9;
    outcome(
        "stability sweep",
        started,
        passed,
        format!(
            "{} reports, worst gap excess over n*eps {worst_gap_excess:.3e}, worst per-box excess over eps {worst_box_excess:.3e}",
            reports.len()
        ),
        Some(reports_to_csv(&reports)),
    )
}

/// Suite 7: wrong-prior regret stays inside `[0, n * epsilon]` across the
/// sweep, and the hand-built single-box construction attains the bound
/// with ratio one.
pub fn check_wrong_prior_regret(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let config = acceptance_sweep_config(seed);
    let reports = match run_sweep(&config) {
        Ok(r) => r,
        Err(e) => {
            return outcome(
                "wrong-prior regret",
                started,
                false,
                format!("sweep error: {e}"),
                None,
            )
        }
    };
    let mut worst_low = f64::NEG_INFINITY;
    let mut worst_high = f64::NEG_INFINITY;
    for r in &reports {
        worst_low = worst_low.max(-r.regret);
        worst_high = worst_high.max(r.regret - r.bound);
    }

    let bern = Distribution::bernoulli(0.5).expect("valid parameter");
    let tight_true = Instance::new(vec![SearchBox::new(0.45, bern.clone()).expect("valid cost")])
        .expect("nonempty");
    let spec = PerturbationSpec::new(0.05, PerturbMode::ShiftDown, 0).expect("valid epsilon");
    let shifted = bern.perturb(&spec).expect("perturbation in ball");
    let tight_believed =
        Instance::new(vec![SearchBox::new(0.45, shifted).expect("valid cost")]).expect("nonempty");
    let tight_regret = regret(&tight_true, &tight_believed).expect("paired instances");
    let tight_err = (tight_regret - 0.05).abs();
    let tight_ratio_err = (tight_regret / 0.05 - 1.0).abs();

    let passed =
        worst_low <= 1e-9 && worst_high <= 1e-9 && tight_err <= 1e-9 && tight_ratio_err <= 1e-9;
    outcome(
        "wrong-prior regret",
        started,
        passed,
        format!(
            "{} reports, worst negative regret {worst_low:.3e}, worst excess over bound {worst_high:.3e}, tight-instance ratio error {tight_ratio_err:.3e}",
            reports.len()
        ),
        None,
    )
}

/// Module-level invariants that do not belong to a single numbered suite:
/// metric axioms and CDF shape, perturbation ball membership, sampling
/// against the DKW band, excess-functional shape, reservation-price
/// monotonicity, and trace accounting.
pub fn check_module_invariants(seed: u64) -> CheckOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 8]));
    let mut failures: Vec<String> = Vec::new();

    // Kolmogorov distance is a metric on random triples.
    for _ in 0..30 {
        let a = random_mixed_dist(&mut rng);
        let b = random_mixed_dist(&mut rng);
        let c = random_mixed_dist(&mut rng);
        if kolmogorov_distance(&a, &a) != 0.0 {
            failures.push("d(a, a) != 0".into());
        }
        if kolmogorov_distance(&a, &b) != kolmogorov_distance(&b, &a) {
            failures.push("asymmetric distance".into());
        }
        let slack =
            kolmogorov_distance(&a, &c) - kolmogorov_distance(&a, &b) - kolmogorov_distance(&b, &c);
        if slack > 1e-12 {
            failures.push(format!("triangle violation {slack:.3e}"));
        }
    }

    // CDFs are nondecreasing on a fine grid.
    for _ in 0..10 {
        let d = random_mixed_dist(&mut rng);
        let mut prev = f64::NEG_INFINITY;
        for k in -100..=1100i32 {
            let z = k as f64 * 1e-3;
            let f = d.cdf(z);
            if f < prev {
                failures.push(format!("cdf decreases at {z}"));
                break;
            }
            prev = f;
        }
    }

    // Perturbations stay in the ball and are identity at zero radius.
    for mode in [
        PerturbMode::ShiftDown,
        PerturbMode::ShiftUp,
        PerturbMode::RandomMix,
    ] {
        for _ in 0..20 {
            let d = random_mixed_dist(&mut rng);
            let eps = rng.random::<f64>();
            let spec = PerturbationSpec::new(eps, mode, rng.random()).expect("epsilon in range");
            match d.perturb(&spec) {
                Ok(out) => {
                    let dk = kolmogorov_distance(&d, &out);
                    if dk > eps + BALL_SLACK {
                        failures.push(format!("{mode} escaped ball: {dk:.3e} > {eps:.3e}"));
                    }
                }
                Err(e) => failures.push(format!("perturb error: {e}")),
            }
            let zero = PerturbationSpec::new(0.0, mode, 1).expect("epsilon in range");
            if d.perturb(&zero).expect("zero radius succeeds") != d {
                failures.push("zero-radius perturbation changed the law".into());
            }
        }
    }

    // Empirical CDF of 1e5 draws within the DKW band around the true CDF.
    let dkw = ((2.0f64 / 0.001).ln() / (2.0 * 1e5)).sqrt();
    let dkw_targets = vec![
        Distribution::uniform(),
        Distribution::bernoulli(0.5).expect("valid parameter"),
        Distribution::discrete(vec![(0.1, 0.3), (0.4, 0.4), (0.9, 0.3)]).expect("valid atoms"),
        Distribution::pwl_cdf(vec![(0.0, 0.25), (0.6, 0.5), (1.0, 1.0)]).expect("valid knots"),
    ];
    for d in &dkw_targets {
        let n = 100_000usize;
        let mut samples: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        samples.sort_by(f64::total_cmp);
        let ecdf = |z: f64| samples.partition_point(|&s| s <= z) as f64 / n as f64;
        let ecdf_left = |z: f64| samples.partition_point(|&s| s < z) as f64 / n as f64;
        let mut points: Vec<f64> = samples.clone();
        points.extend(
            d.atoms()
                .map(|a| a.iter().map(|&(v, _)| v).collect::<Vec<_>>())
                .or_else(|| d.knots().map(|k| k.iter().map(|&(v, _)| v).collect()))
                .unwrap_or_default(),
        );
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mut sup = 0.0f64;
        for &z in &points {
            sup = sup.max((ecdf(z) - d.cdf(z)).abs());
            sup = sup.max((ecdf_left(z) - d.cdf_left(z)).abs());
        }
        if sup > dkw {
            failures.push(format!("DKW violation: {sup:.4} > {dkw:.4}"));
        }
    }

    // Excess functional: nonincreasing, 1-Lipschitz, convex.
    for _ in 0..20 {
        let d = random_mixed_dist(&mut rng);
        let h = 1e-4;
        for k in 0..=20 {
            let s = -0.2 + k as f64 * 0.07;
            let (lo, mid, hi) = (
                expected_excess(&d, s - h),
                expected_excess(&d, s),
                expected_excess(&d, s + h),
            );
            if hi > mid + 1e-15 {
                failures.push(format!("excess increases at {s}"));
            }
            if mid - hi > h + 1e-9 {
                failures.push(format!("excess steeper than 1 at {s}"));
            }
            if lo + hi - 2.0 * mid < -1e-9 {
                failures.push(format!("excess concave at {s}"));
            }
        }
    }

    // Reservation price is nonincreasing in cost.
    for _ in 0..20 {
        let d = random_mixed_dist(&mut rng);
        let mean = d.mean();
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let cost = mean * 1.2 * k as f64 / 20.0;
            let sigma = reservation_price(&d, cost).expect("nonnegative cost");
            if sigma > prev + 1e-12 {
                failures.push(format!("reservation price increased at cost {cost}"));
            }
            prev = sigma;
        }
    }

    // Trace accounting and agreement of the two simulation paths.
    for _ in 0..100 {
        let n = rng.random_range(1..=5usize);
        let tau: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 1.4 - 0.2).collect();
        let costs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.4).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let policy = ThresholdPolicy::new(tau).expect("finite thresholds");
        let trace = run_policy(&policy, &costs, &values).expect("dimensions match");
        if trace.recompute_utility(&costs) != trace.utility {
            failures.push("trace accounting mismatch".into());
        }
        if walk_utility(&policy, &costs, &values) != trace.utility {
            failures.push("simulation paths disagree".into());
        }
    }

    let passed = failures.is_empty();
    let detail = if passed {
        "metric axioms, cdf shape, perturbation balls, DKW band, excess shape, price monotonicity, trace accounting".to_string()
    } else {
        failures.join("; ")
    };
    outcome("module invariants", started, passed, detail, None)
}

/// Run every suite in order.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_reservation_solver(seed),
        check_capped_equality(seed),
        check_threshold_optimality(seed),
        check_oracle_agreement(seed),
        check_conditional_utility(seed),
        check_stability_sweep(seed),
        check_wrong_prior_regret(seed),
        check_module_invariants(seed),
    ]
}
