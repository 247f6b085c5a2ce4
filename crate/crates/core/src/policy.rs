//! Threshold-ordered sequential search and its utility oracles.
//!
//! A [`ThresholdPolicy`] walks boxes in descending threshold order, starting
//! from the zero outside option. It opens the next box while that box's
//! threshold strictly exceeds the best value seen so far, stops at the
//! first threshold at or below the running best (ties stop: opening at the
//! threshold has zero expected marginal gain net of cost), and accepts the
//! best opened value. Expected utility is available through three
//! independent routes:
//!
//! - [`run_policy`] / [`expected_utility_mc`]: trace simulation, seeded
//!   Monte Carlo over per-trial value draws;
//! - [`expected_utility_exact`]: exact enumeration over the product of
//!   discrete supports with compensated summation;
//! - [`capped_benchmark`]: `E[max(0, max_i min(sigma_i, X_i))]`, the
//!   capped-value characterization of the optimal utility.
//!
//! [`conditional_utility`] pins a prefix of realized values plus one box
//! value and averages over the remaining boxes, which is what the
//! robustness analysis differentiates box by box.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservation::{capped_value, thresholds, Instance};

/// Default cap on the enumerated outcome-space size.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Stable descending sort of thresholds; ties keep the smaller index first.
pub fn inspection_order(tau: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tau.len()).collect();
    idx.sort_by(|&a, &b| tau[b].total_cmp(&tau[a]).then(a.cmp(&b)));
    idx
}

/// A threshold vector together with its derived inspection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    tau: Vec<f64>,
    order: Vec<usize>,
}

impl ThresholdPolicy {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if let Some(i) = tau.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFiniteThreshold(i));
        }
        let order = inspection_order(&tau);
        Ok(Self { tau, order })
    }

    /// The reservation-price policy of an instance.
    pub fn from_instance(inst: &Instance) -> Self {
        Self::new(thresholds(inst)).expect("reservation prices are finite")
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

/// One realized run: opened boxes in order, the accepted box, the values
/// seen, and the realized utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub opened: Vec<usize>,
    pub accepted: Option<usize>,
    pub values_seen: Vec<f64>,
    pub utility: f64,
}

impl Trace {
    /// Rebuild the utility from opened costs and the accepted value; equals
    /// the stored utility bit for bit.
    pub fn recompute_utility(&self, costs: &[f64]) -> f64 {
        let mut cost_sum = 0.0;
        for &i in &self.opened {
            cost_sum += costs[i];
        }
        let value = match self.accepted {
            Some(i) => {
                let k = self
                    .opened
                    .iter()
                    .position(|&j| j == i)
                    .expect("accepted box was opened");
                self.values_seen[k]
            }
            None => 0.0,
        };
        value - cost_sum
    }
}

/// A Monte Carlo utility estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u32,
    pub ci95: (f64, f64),
}

/// Deterministic simulation of one run on realized values.
///
/// Walks the inspection order; opens box `i` while `tau_i` strictly exceeds
/// the running best (initialized to the zero outside option), stops at the
/// first `tau_i` at or below it. Accepts the opened box with the largest
/// value, ties to the smallest index; accepts nothing when nothing was
/// opened.
pub fn run_policy(policy: &ThresholdPolicy, costs: &[f64], values: &[f64]) -> Result<Trace> {
    let n = policy.len();
    if costs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: costs.len(),
        });
    }
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: values.len(),
        });
    }
    let mut best = 0.0f64;
    let mut cost_sum = 0.0f64;
    let mut opened = Vec::new();
    let mut values_seen = Vec::new();
    for &i in policy.order() {
        if policy.tau()[i] <= best {
            break;
        }
        opened.push(i);
        values_seen.push(values[i]);
        cost_sum += costs[i];
        if values[i] > best {
            best = values[i];
        }
    }
    let mut accepted: Option<(usize, f64)> = None;
    for (&i, &v) in opened.iter().zip(&values_seen) {
        let better = match accepted {
            None => true,
            Some((bi, bv)) => v > bv || (v == bv && i < bi),
        };
        if better {
            accepted = Some((i, v));
        }
    }
    let utility = accepted.map_or(0.0, |(_, v)| v) - cost_sum;
    Ok(Trace {
        opened,
        accepted: accepted.map(|(i, _)| i),
        values_seen,
        utility,
    })
}

/// Allocation-free utility of one run; agrees with [`run_policy`] exactly.
pub(crate) fn walk_utility(policy: &ThresholdPolicy, costs: &[f64], values: &[f64]) -> f64 {
    let mut best = 0.0f64;
    let mut cost_sum = 0.0f64;
    let mut any = false;
    for &i in policy.order() {
        if policy.tau()[i] <= best {
            break;
        }
        any = true;
        cost_sum += costs[i];
        if values[i] > best {
            best = values[i];
        }
    }
    // Values live in [0, 1], so when anything was opened the running best
    // equals the accepted value.
    if any {
        best - cost_sum
    } else {
        0.0
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Atom slices of a fully discrete instance.
fn discrete_supports(inst: &Instance) -> Result<Vec<&[(f64, f64)]>> {
    inst.boxes()
        .iter()
        .enumerate()
        .map(|(i, b)| b.dist().atoms().ok_or(Error::UnsupportedContinuous(i)))
        .collect()
}

fn product_size(supports: &[&[(f64, f64)]]) -> u128 {
    supports
        .iter()
        .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
}

/// Visit every outcome of the support product with its probability.
pub(crate) fn for_each_outcome<F: FnMut(&[f64], f64)>(supports: &[&[(f64, f64)]], mut f: F) {
    let n = supports.len();
    let mut idx = vec![0usize; n];
    let mut values = vec![0.0f64; n];
    loop {
        let mut w = 1.0;
        for k in 0..n {
            let (v, p) = supports[k][idx[k]];
            values[k] = v;
            w *= p;
        }
        f(&values, w);
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            idx[k] += 1;
            if idx[k] < supports[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Exact expected utility of a policy over a fully discrete instance, by
/// enumeration of the outcome product with compensated summation.
pub fn expected_utility_exact(policy: &ThresholdPolicy, inst: &Instance) -> Result<f64> {
    expected_utility_exact_with_cap(policy, inst, DEFAULT_ENUMERATION_CAP)
}

/// As [`expected_utility_exact`], with an explicit outcome-space cap.
pub fn expected_utility_exact_with_cap(
    policy: &ThresholdPolicy,
    inst: &Instance,
    cap: u128,
) -> Result<f64> {
    let n = inst.len();
    if policy.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: policy.len(),
        });
    }
    let supports = discrete_supports(inst)?;
    let size = product_size(&supports);
    if size > cap {
        return Err(Error::ExplosionCap { size, cap });
    }
    let costs = inst.costs();
    let mut acc = CompensatedSum::default();
    for_each_outcome(&supports, |values, w| {
        acc.add(w * walk_utility(policy, &costs, values));
    });
    Ok(acc.value())
}

/// `E[max(0, max_i min(sigma_i, X_i))]` over a fully discrete instance.
///
/// The zero inside the max realizes the outside option. Computed by
/// support-product enumeration, independent of the trace simulator.
pub fn capped_benchmark(inst: &Instance) -> Result<f64> {
    capped_benchmark_with_cap(inst, DEFAULT_ENUMERATION_CAP)
}

/// As [`capped_benchmark`], with an explicit outcome-space cap.
pub fn capped_benchmark_with_cap(inst: &Instance, cap: u128) -> Result<f64> {
    let supports = discrete_supports(inst)?;
    let size = product_size(&supports);
    if size > cap {
        return Err(Error::ExplosionCap { size, cap });
    }
    let sigma = thresholds(inst);
    let mut acc = CompensatedSum::default();
    for_each_outcome(&supports, |values, w| {
        let mut m = 0.0f64;
        for (s, &x) in sigma.iter().zip(values) {
            let kappa = capped_value(*s, x);
            if kappa > m {
                m = kappa;
            }
        }
        acc.add(w * m);
    });
    Ok(acc.value())
}

/// Monte Carlo estimate of the expected utility: `trials` independent
/// simulated runs with per-trial value draws, deterministic given `seed`.
///
/// `trials` must be at least 2 so the sample standard error is defined.
pub fn expected_utility_mc(
    policy: &ThresholdPolicy,
    inst: &Instance,
    trials: u32,
    seed: u64,
) -> Result<UtilityEstimate> {
    assert!(
        trials >= 2,
        "Monte Carlo estimation needs at least 2 trials"
    );
    let n = inst.len();
    if policy.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: policy.len(),
        });
    }
    let costs = inst.costs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0f64; n];
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for t in 0..trials {
        for (k, b) in inst.boxes().iter().enumerate() {
            values[k] = b.dist().sample(&mut rng);
        }
        let u = walk_utility(policy, &costs, &values);
        // Welford update.
        let delta = u - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (u - mean);
    }
    let variance = m2 / (trials - 1) as f64;
    let stderr = (variance / trials as f64).sqrt();
    Ok(UtilityEstimate {
        mean,
        stderr,
        trials,
        ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
    })
}

/// Expected utility with boxes `0..prefix.len()` pinned to realized values,
/// the next box pinned to `x`, and the remaining boxes averaged over their
/// discrete supports.
///
/// Boxes must already be ordered by nonincreasing threshold, so that the
/// pinned prefix is exactly the start of the inspection order.
pub fn conditional_utility(
    policy: &ThresholdPolicy,
    inst: &Instance,
    prefix_values: &[f64],
    x: f64,
) -> Result<f64> {
    let n = inst.len();
    if policy.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: policy.len(),
        });
    }
    let i = prefix_values.len();
    if i >= n {
        return Err(Error::PrefixTooLong { prefix: i, n });
    }
    for k in 1..n {
        if policy.tau()[k] > policy.tau()[k - 1] {
            return Err(Error::UnorderedThresholds(k));
        }
    }
    let suffix_supports: Result<Vec<&[(f64, f64)]>> = inst.boxes()[i + 1..]
        .iter()
        .enumerate()
        .map(|(k, b)| {
            b.dist()
                .atoms()
                .ok_or(Error::UnsupportedContinuous(i + 1 + k))
        })
        .collect();
    let suffix_supports = suffix_supports?;
    let size = product_size(&suffix_supports);
    if size > DEFAULT_ENUMERATION_CAP {
        return Err(Error::ExplosionCap {
            size,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let costs = inst.costs();
    let mut values = vec![0.0f64; n];
    values[..i].copy_from_slice(prefix_values);
    values[i] = x;
    let mut acc = CompensatedSum::default();
    if suffix_supports.is_empty() {
        return Ok(walk_utility(policy, &costs, &values));
    }
    for_each_outcome(&suffix_supports, |suffix, w| {
        values[i + 1..].copy_from_slice(suffix);
        acc.add(w * walk_utility(policy, &costs, &values));
    });
    Ok(acc.value())
}
