//! Inaccurate-prior experiments.
//!
//! Everything here quantifies how a fixed reservation-price policy degrades
//! when the value laws it was derived from are wrong by at most `epsilon`
//! in Kolmogorov distance:
//!
//! - [`stability_gap`]: same policy, true vs perturbed laws;
//! - [`regret`]: policy from the believed laws, evaluated under the truth;
//! - [`hybrid_swap_gaps`]: the telescoping box-by-box swap that decomposes
//!   the stability gap into per-box contributions;
//! - [`run_sweep`]: seeded grids over instance size, radius, and
//!   perturbation mode;
//! - [`adversarial_search`]: hill-climbing over per-box shift directions to
//!   probe how tight the `n * epsilon` bound is.
//!
//! All utilities are computed with the exact enumeration oracle, so every
//! reported gap is free of Monte Carlo noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{kolmogorov_distance, Distribution, PerturbMode, PerturbationSpec};
use crate::error::{Error, Result};
use crate::policy::{expected_utility_exact, inspection_order, ThresholdPolicy};
use crate::reservation::{thresholds, Instance, SearchBox};

/// Slack used when the search re-validates per-box feasibility.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Outcome of one true-vs-perturbed comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub n: usize,
    pub epsilon: f64,
    pub mode: String,
    pub seed: u64,
    /// `|W_sigma(true) - W_sigma(perturbed)|`.
    pub stability_gap: f64,
    /// `W_sigma(true) - W_sigma'(true)` where `sigma'` comes from the
    /// believed laws.
    pub regret: f64,
    /// `n * epsilon`.
    pub bound: f64,
    /// `stability_gap / bound`, 0 when the bound is 0.
    pub gap_ratio: f64,
    /// `regret / bound`, 0 when the bound is 0.
    pub regret_ratio: f64,
    /// Telescoping box-by-box swap gaps.
    pub per_box_gaps: Vec<f64>,
}

impl RobustnessReport {
    pub fn csv_header() -> &'static str {
        "n,epsilon,mode,seed,stability_gap,regret,bound,gap_ratio,regret_ratio"
    }

    /// One CSV row; floats keep full round-trip precision.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.epsilon,
            self.mode,
            self.seed,
            self.stability_gap,
            self.regret,
            self.bound,
            self.gap_ratio,
            self.regret_ratio
        )
    }
}

/// Render reports as a CSV document with header.
pub fn reports_to_csv(reports: &[RobustnessReport]) -> String {
    let mut out = String::from(RobustnessReport::csv_header());
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn check_paired(a: &Instance, b: &Instance) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    for (i, (ba, bb)) in a.boxes().iter().zip(b.boxes()).enumerate() {
        if ba.cost() != bb.cost() {
            return Err(Error::CostMismatch(i));
        }
    }
    Ok(())
}

/// `|W_sigma(D) - W_sigma(D')|` for the reservation-price policy of the
/// true instance, evaluated exactly under both value laws.
pub fn stability_gap(inst: &Instance, perturbed: &Instance) -> Result<f64> {
    check_paired(inst, perturbed)?;
    let policy = ThresholdPolicy::from_instance(inst);
    let w_true = expected_utility_exact(&policy, inst)?;
    let w_pert = expected_utility_exact(&policy, perturbed)?;
    Ok((w_true - w_pert).abs())
}

/// `W_sigma(D) - W_sigma'(D)`: the loss from running the policy derived
/// from the believed laws against the true ones. Nonnegative up to solver
/// tolerance because the true policy is optimal for the truth.
pub fn regret(inst: &Instance, believed: &Instance) -> Result<f64> {
    check_paired(inst, believed)?;
    let policy_true = ThresholdPolicy::from_instance(inst);
    let policy_believed = ThresholdPolicy::from_instance(believed);
    let w_true = expected_utility_exact(&policy_true, inst)?;
    let w_believed = expected_utility_exact(&policy_believed, inst)?;
    Ok(w_true - w_believed)
}

/// Telescoping per-box gaps: entry `i` compares the mixed instances that
/// differ only in whether box `i` uses the true or perturbed law, with all
/// earlier boxes already perturbed. Utilities use the true instance's
/// reservation-price policy throughout.
pub fn hybrid_swap_gaps(inst: &Instance, perturbed: &Instance) -> Result<Vec<f64>> {
    check_paired(inst, perturbed)?;
    let n = inst.len();
    let policy = ThresholdPolicy::from_instance(inst);
    let mixed = |swap_up_to: usize| -> Result<f64> {
        let boxes: Vec<SearchBox> = (0..n)
            .map(|j| {
                if j < swap_up_to {
                    perturbed.boxes()[j].clone()
                } else {
                    inst.boxes()[j].clone()
                }
            })
            .collect();
        expected_utility_exact(&policy, &Instance::new(boxes)?)
    };
    let mut prev = mixed(0)?;
    let mut gaps = Vec::with_capacity(n);
    for i in 1..=n {
        let next = mixed(i)?;
        gaps.push((next - prev).abs());
        prev = next;
    }
    Ok(gaps)
}

/// Assemble the full report for a true/perturbed pair.
pub fn evaluate_pair(
    inst: &Instance,
    perturbed: &Instance,
    epsilon: f64,
    mode: &str,
    seed: u64,
) -> Result<RobustnessReport> {
    let n = inst.len();
    let gap = stability_gap(inst, perturbed)?;
    let reg = regret(inst, perturbed)?;
    let per_box = hybrid_swap_gaps(inst, perturbed)?;
    let bound = n as f64 * epsilon;
    let ratio = |v: f64| if bound == 0.0 { 0.0 } else { v / bound };
    Ok(RobustnessReport {
        n,
        epsilon,
        mode: mode.to_string(),
        seed,
        stability_gap: gap,
        regret: reg,
        bound,
        gap_ratio: ratio(gap),
        regret_ratio: ratio(reg),
        per_box_gaps: per_box,
    })
}

/// Families the sweep can draw instances from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFamily {
    /// Boxes with 2-4 atoms at random locations and random costs below the
    /// mean.
    RandomDiscrete,
    /// Two-point laws on {0, 1} with random success mass and random costs.
    BernoulliLike,
}

/// Grid description for [`run_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub epsilon_values: Vec<f64>,
    pub instances_per_cell: usize,
    pub modes: Vec<PerturbMode>,
    pub seed: u64,
    pub instance_family: InstanceFamily,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::InvalidConfig(
                "n_values must be nonempty positive integers".into(),
            ));
        }
        if self.epsilon_values.is_empty()
            || self.epsilon_values.iter().any(|e| !(0.0..=1.0).contains(e))
        {
            return Err(Error::InvalidConfig(
                "epsilon_values must be nonempty and inside [0, 1]".into(),
            ));
        }
        if self.instances_per_cell == 0 {
            return Err(Error::InvalidConfig(
                "instances_per_cell must be positive".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidConfig("modes must be nonempty".into()));
        }
        Ok(())
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derivation for nested experiment structure.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut s = 0x853C_49E6_748F_EA9Bu64;
    for &p in parts {
        s = splitmix(s ^ splitmix(p));
    }
    s
}

/// One random discrete law: 2-4 atoms, spaced-out locations, mass bounded
/// away from zero, mean bounded away from zero so costs stay meaningful.
pub(crate) fn random_discrete_dist<R: Rng + ?Sized>(rng: &mut R) -> Distribution {
    loop {
        let k = rng.random_range(2..=4usize);
        let mut values: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        values.sort_by(f64::total_cmp);
        let spaced = values.windows(2).all(|w| w[1] - w[0] > 1e-3);
        if !spaced {
            continue;
        }
        let raw: Vec<f64> = (0..k).map(|_| 0.1 + 0.9 * rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let atoms: Vec<(f64, f64)> = values
            .into_iter()
            .zip(raw.into_iter().map(|p| p / total))
            .collect();
        let d = Distribution::discrete(atoms).expect("generated atoms are valid");
        if d.mean() >= 0.05 {
            return d;
        }
    }
}

/// Draw an instance from a family and sort its boxes by descending
/// reservation price, the canonical order for every experiment here.
pub fn random_instance<R: Rng + ?Sized>(family: InstanceFamily, n: usize, rng: &mut R) -> Instance {
    let boxes: Vec<SearchBox> = (0..n)
        .map(|_| {
            let dist = match family {
                InstanceFamily::RandomDiscrete => random_discrete_dist(rng),
                InstanceFamily::BernoulliLike => {
                    let p = 0.2 + 0.6 * rng.random::<f64>();
                    Distribution::bernoulli(p).expect("bernoulli parameter in range")
                }
            };
            // Mostly worthwhile boxes, occasionally one too expensive to
            // ever open.
            let mean = dist.mean();
            let cost = if rng.random::<f64>() < 0.1 {
                mean * (1.0 + rng.random::<f64>())
            } else {
                mean * rng.random::<f64>()
            };
            SearchBox::new(cost, dist).expect("generated cost is valid")
        })
        .collect();
    let inst = Instance::new(boxes).expect("n >= 1");
    let sigma = thresholds(&inst);
    let order = inspection_order(&sigma);
    let sorted = order.iter().map(|&i| inst.boxes()[i].clone()).collect();
    Instance::new(sorted).expect("reordering preserves boxes")
}

/// Perturb every box of an instance with per-box derived seeds.
pub fn perturb_instance(
    inst: &Instance,
    epsilon: f64,
    mode: PerturbMode,
    seed: u64,
) -> Result<Instance> {
    let boxes: Result<Vec<SearchBox>> = inst
        .boxes()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let spec = PerturbationSpec::new(epsilon, mode, mix_seed(&[seed, i as u64]))?;
            SearchBox::new(b.cost(), b.dist().perturb(&spec)?)
        })
        .collect();
    Instance::new(boxes?)
}

/// Run the full grid: for every `(n, epsilon, mode, replicate)` cell, draw
/// an instance, perturb each box, and report. Deterministic given
/// `config.seed`; reports come back in cell iteration order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<RobustnessReport>> {
    config.validate()?;
    let mut reports = Vec::new();
    for &n in &config.n_values {
        for &eps in &config.epsilon_values {
            for (mode_idx, &mode) in config.modes.iter().enumerate() {
                for rep in 0..config.instances_per_cell {
                    let cell_seed = mix_seed(&[
                        config.seed,
                        n as u64,
                        eps.to_bits(),
                        mode_idx as u64,
                        rep as u64,
                    ]);
                    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
                    let inst = random_instance(config.instance_family, n, &mut rng);
                    let perturbed = perturb_instance(&inst, eps, mode, cell_seed)?;
                    let report =
                        evaluate_pair(&inst, &perturbed, eps, &mode.to_string(), cell_seed)?;
                    reports.push(report);
                }
            }
        }
    }
    Ok(reports)
}

/// Candidate per-box moves for the adversarial search.
const SEARCH_MOVES: [Option<(PerturbMode, f64)>; 5] = [
    None,
    Some((PerturbMode::ShiftDown, 1.0)),
    Some((PerturbMode::ShiftDown, 0.5)),
    Some((PerturbMode::ShiftUp, 1.0)),
    Some((PerturbMode::ShiftUp, 0.5)),
];

/// Regret-maximizing search over per-box CDF shift directions inside the
/// epsilon ball: random restarts plus coordinate hill-climbing, spending at
/// most `budget` candidate evaluations. Heuristic by construction; the
/// result is a lower bound on the worst case.
pub fn adversarial_search(
    inst: &Instance,
    epsilon: f64,
    budget: u32,
    seed: u64,
) -> Result<RobustnessReport> {
    if budget == 0 {
        return Err(Error::InvalidConfig(
            "search budget must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let n = inst.len();
    let believed_for = |assignment: &[usize]| -> Result<Instance> {
        let boxes: Result<Vec<SearchBox>> = inst
            .boxes()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let dist = match SEARCH_MOVES[assignment[i]] {
                    None => b.dist().clone(),
                    Some((mode, scale)) => {
                        let spec = PerturbationSpec::new(
                            epsilon * scale,
                            mode,
                            mix_seed(&[seed, i as u64, assignment[i] as u64]),
                        )?;
                        b.dist().perturb(&spec)?
                    }
                };
                SearchBox::new(b.cost(), dist)
            })
            .collect();
        Instance::new(boxes?)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evals = 0u32;
    let mut best_assignment = vec![0usize; n];
    let mut best_regret = f64::NEG_INFINITY;
    let mut first_restart = true;

    while evals < budget {
        let mut current: Vec<usize> = if first_restart {
            vec![0; n]
        } else {
            (0..n)
                .map(|_| rng.random_range(0..SEARCH_MOVES.len()))
                .collect()
        };
        first_restart = false;
        let mut current_regret = regret(inst, &believed_for(&current)?)?;
        evals += 1;
        if current_regret > best_regret {
            best_regret = current_regret;
            best_assignment = current.clone();
        }
        let mut improved = true;
        while improved && evals < budget {
            improved = false;
            'coords: for i in 0..n {
                for mv in 0..SEARCH_MOVES.len() {
                    if mv == current[i] {
                        continue;
                    }
                    let mut candidate = current.clone();
                    candidate[i] = mv;
                    let r = regret(inst, &believed_for(&candidate)?)?;
                    evals += 1;
                    if r > current_regret + 1e-15 {
                        current = candidate;
                        current_regret = r;
                        improved = true;
                    }
                    if current_regret > best_regret {
                        best_regret = current_regret;
                        best_assignment = current.clone();
                    }
                    if evals >= budget {
                        break 'coords;
                    }
                }
            }
        }
    }

    let believed = believed_for(&best_assignment)?;
    for (a, b) in inst.boxes().iter().zip(believed.boxes()) {
        let dk = kolmogorov_distance(a.dist(), b.dist());
        if dk > epsilon + FEASIBILITY_SLACK {
            return Err(Error::PerturbationBall {
                distance: dk,
                epsilon,
            });
        }
    }
    evaluate_pair(inst, &believed, epsilon, "adversarial", seed)
}
