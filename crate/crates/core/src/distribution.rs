//! Value distributions on the unit interval.
//!
//! Two representations are supported: finite discrete laws, and continuous
//! laws described by a piecewise-linear CDF. Discrete laws make exact
//! enumeration oracles possible downstream; piecewise-linear CDFs cover the
//! continuous case. Both expose exact CDF evaluation (with left limits),
//! inverse-CDF sampling, exact means, and an exact Kolmogorov distance.
//! Seeded perturbation generators produce laws at Kolmogorov distance at
//! most `epsilon` from their input, which is what the robustness
//! experiments quantify over.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability mass must sum to 1 within this tolerance at construction.
/// Smaller deviations are normalized away, larger ones are rejected.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Slack allowed when re-validating a perturbation against its epsilon ball.
pub const BALL_SLACK: f64 = 1e-12;

/// Wire representation: `{"type":"discrete","atoms":[[v,p],...]}` or
/// `{"type":"pwl_cdf","knots":[[v,F],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Repr {
    Discrete { atoms: Vec<(f64, f64)> },
    PwlCdf { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// Atoms `(value, probability)` with strictly increasing values.
    Discrete(Vec<(f64, f64)>),
    /// Knots `(value, cdf)`; the CDF interpolates linearly between knots.
    Pwl(Vec<(f64, f64)>),
}

/// A value law supported on `[0, 1]`.
///
/// Instances are immutable and always satisfy their construction
/// invariants; build them through [`Distribution::discrete`],
/// [`Distribution::pwl_cdf`], or the convenience constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct Distribution {
    kind: Kind,
}

impl TryFrom<Repr> for Distribution {
    type Error = Error;

    fn try_from(repr: Repr) -> Result<Self> {
        match repr {
            Repr::Discrete { atoms } => Distribution::discrete(atoms),
            Repr::PwlCdf { knots } => Distribution::pwl_cdf(knots),
        }
    }
}

impl From<Distribution> for Repr {
    fn from(d: Distribution) -> Repr {
        match d.kind {
            Kind::Discrete(atoms) => Repr::Discrete { atoms },
            Kind::Pwl(knots) => Repr::PwlCdf { knots },
        }
    }
}

impl Distribution {
    /// Discrete law from `(value, probability)` atoms.
    ///
    /// Values must be strictly increasing within `[0, 1]`; probabilities
    /// must lie in `(0, 1]` and sum to 1 within [`MASS_TOLERANCE`] (the sum
    /// is normalized away when below tolerance).
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut total = 0.0;
        for (i, &(v, p)) in atoms.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidDistribution(format!(
                    "atom value {v} outside [0, 1]"
                )));
            }
            if !p.is_finite() || p <= 0.0 || p > 1.0 + MASS_TOLERANCE {
                return Err(Error::InvalidDistribution(format!(
                    "atom probability {p} outside (0, 1]"
                )));
            }
            if i > 0 && v <= atoms[i - 1].0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom values must be strictly increasing ({} then {v})",
                    atoms[i - 1].0
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "atom probabilities sum to {total}"
            )));
        }
        // Rescale only above floating-point noise so that re-parsing an
        // already-normalized vector is a bit-exact no-op.
        let atoms = if (total - 1.0).abs() > 1e-14 {
            atoms.into_iter().map(|(v, p)| (v, p / total)).collect()
        } else {
            atoms
        };
        Ok(Self {
            kind: Kind::Discrete(atoms),
        })
    }

    /// Continuous law from `(value, cdf)` knots, linearly interpolated.
    ///
    /// Knot values must be strictly increasing, starting at 0 and ending at
    /// 1; cdf entries must be nondecreasing, with the first at least 0 and
    /// the last exactly 1. A first cdf entry above 0 encodes an atom at 0.
    pub fn pwl_cdf(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidDistribution(
                "piecewise-linear CDF needs at least two knots".into(),
            ));
        }
        for (i, &(v, f)) in knots.iter().enumerate() {
            if !v.is_finite() || !f.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "non-finite knot ({v}, {f})"
                )));
            }
            if i > 0 && v <= knots[i - 1].0 {
                return Err(Error::InvalidDistribution(format!(
                    "knot values must be strictly increasing ({} then {v})",
                    knots[i - 1].0
                )));
            }
            if i > 0 && f < knots[i - 1].1 {
                return Err(Error::InvalidDistribution(format!(
                    "cdf entries must be nondecreasing ({} then {f})",
                    knots[i - 1].1
                )));
            }
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if first.0 != 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "first knot value must be 0, got {}",
                first.0
            )));
        }
        if last.0 != 1.0 {
            return Err(Error::InvalidDistribution(format!(
                "last knot value must be 1, got {}",
                last.0
            )));
        }
        if first.1 < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "first cdf entry must be at least 0, got {}",
                first.1
            )));
        }
        if last.1 != 1.0 {
            return Err(Error::InvalidDistribution(format!(
                "last cdf entry must be exactly 1, got {}",
                last.1
            )));
        }
        Ok(Self {
            kind: Kind::Pwl(knots),
        })
    }

    /// The uniform law on `[0, 1]`.
    pub fn uniform() -> Self {
        Self::pwl_cdf(vec![(0.0, 0.0), (1.0, 1.0)]).expect("uniform knots are valid")
    }

    /// A point mass at `v`.
    pub fn point_mass(v: f64) -> Result<Self> {
        Self::discrete(vec![(v, 1.0)])
    }

    /// Mass `p` at 1 and `1 - p` at 0.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!(
                "bernoulli parameter {p} outside [0, 1]"
            )));
        }
        if p == 0.0 {
            Self::point_mass(0.0)
        } else if p == 1.0 {
            Self::point_mass(1.0)
        } else {
            Self::discrete(vec![(0.0, 1.0 - p), (1.0, p)])
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, Kind::Discrete(_))
    }

    /// Atoms of a discrete law; `None` for piecewise-linear CDFs.
    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            Kind::Discrete(atoms) => Some(atoms),
            Kind::Pwl(_) => None,
        }
    }

    /// Knots of a piecewise-linear CDF; `None` for discrete laws.
    pub fn knots(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            Kind::Pwl(knots) => Some(knots),
            Kind::Discrete(_) => None,
        }
    }

    /// `P[X <= z]`, right-continuous, defined for every real `z`.
    ///
    /// Clamped to `[0, 1]` so partial mass sums cannot stray outside by a
    /// rounding ulp.
    pub fn cdf(&self, z: f64) -> f64 {
        match &self.kind {
            Kind::Discrete(atoms) => {
                if z < 0.0 {
                    return 0.0;
                }
                let k = atoms.partition_point(|&(v, _)| v <= z);
                let sum: f64 = atoms[..k].iter().map(|&(_, p)| p).sum();
                sum.clamp(0.0, 1.0)
            }
            Kind::Pwl(knots) => {
                if z < 0.0 {
                    0.0
                } else if z >= 1.0 {
                    1.0
                } else {
                    pwl_eval(knots, z).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Left limit `P[X < z]`.
    pub fn cdf_left(&self, z: f64) -> f64 {
        match &self.kind {
            Kind::Discrete(atoms) => {
                let k = atoms.partition_point(|&(v, _)| v < z);
                let sum: f64 = atoms[..k].iter().map(|&(_, p)| p).sum();
                sum.clamp(0.0, 1.0)
            }
            Kind::Pwl(knots) => {
                if z <= 0.0 {
                    0.0
                } else if z > 1.0 {
                    1.0
                } else {
                    pwl_eval(knots, z).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Exact expectation.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(atoms) => atoms.iter().map(|&(v, p)| v * p).sum(),
            // E[X] = integral of (1 - F) over [0, 1] for laws on [0, 1];
            // each segment contributes its width times one minus the
            // average cdf height.
            Kind::Pwl(knots) => knots
                .windows(2)
                .map(|w| {
                    let (a, fa) = w[0];
                    let (b, fb) = w[1];
                    (b - a) * (1.0 - 0.5 * (fa + fb))
                })
                .sum(),
        }
    }

    /// Smallest `z` with `F(z) = 1` (the essential supremum of the support).
    pub fn sup_support(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(atoms) => atoms[atoms.len() - 1].0,
            Kind::Pwl(knots) => {
                let j = knots.partition_point(|&(_, f)| f < 1.0);
                knots[j.min(knots.len() - 1)].0
            }
        }
    }

    /// Smallest `z` with `F(z) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Discrete(atoms) => {
                let mut cum = 0.0;
                for &(v, p) in atoms {
                    cum += p;
                    if cum >= u {
                        return v;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            Kind::Pwl(knots) => {
                if u <= knots[0].1 {
                    return 0.0;
                }
                let j = knots.partition_point(|&(_, f)| f < u);
                let j = j.min(knots.len() - 1);
                let (v0, f0) = knots[j - 1];
                let (v1, f1) = knots[j];
                v0 + (u - f0) * (v1 - v0) / (f1 - f0)
            }
        }
    }

    /// Inverse-CDF draw; deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Values where the CDF can change shape (atom or knot locations).
    fn break_values(&self) -> impl Iterator<Item = f64> + '_ {
        match &self.kind {
            Kind::Discrete(atoms) => atoms.iter(),
            Kind::Pwl(knots) => knots.iter(),
        }
        .map(|&(v, _)| v)
    }

    /// A law within Kolmogorov distance `spec.epsilon` of `self`.
    ///
    /// `ShiftDown` moves mass from the top of the support toward the bottom
    /// atom or knot (a pessimistic prior), `ShiftUp` moves it toward the
    /// top (optimistic), and `RandomMix` applies a seeded reweighting whose
    /// CDF displacement is rescaled so its sup-norm stays within epsilon.
    /// The output is re-validated against the ball before it is returned.
    pub fn perturb(&self, spec: &PerturbationSpec) -> Result<Distribution> {
        if !(0.0..=1.0).contains(&spec.epsilon) {
            return Err(Error::InvalidEpsilon(spec.epsilon));
        }
        if spec.epsilon == 0.0 {
            return Ok(self.clone());
        }
        let out = match (&self.kind, spec.mode) {
            (Kind::Discrete(atoms), PerturbMode::ShiftDown) => {
                shift_discrete(atoms, spec.epsilon, true)?
            }
            (Kind::Discrete(atoms), PerturbMode::ShiftUp) => {
                shift_discrete(atoms, spec.epsilon, false)?
            }
            (Kind::Discrete(atoms), PerturbMode::RandomMix) => {
                random_mix_discrete(atoms, spec.epsilon, spec.seed)?
            }
            (Kind::Pwl(knots), PerturbMode::ShiftDown) => pwl_shift_down(knots, spec.epsilon)?,
            (Kind::Pwl(knots), PerturbMode::ShiftUp) => pwl_shift_up(knots, spec.epsilon)?,
            (Kind::Pwl(knots), PerturbMode::RandomMix) => {
                random_mix_pwl(knots, spec.epsilon, spec.seed)?
            }
        };
        let distance = kolmogorov_distance(self, &out);
        if distance > spec.epsilon + BALL_SLACK {
            return Err(Error::PerturbationBall {
                distance,
                epsilon: spec.epsilon,
            });
        }
        Ok(out)
    }
}

/// Linear interpolation of the knot CDF at `z` in `[0, 1]`.
fn pwl_eval(knots: &[(f64, f64)], z: f64) -> f64 {
    let j = knots.partition_point(|&(v, _)| v <= z);
    if j == knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (v0, f0) = knots[j - 1];
    let (v1, f1) = knots[j];
    f0 + (f1 - f0) * (z - v0) / (v1 - v0)
}

/// `sup_z |F_a(z) - F_b(z)|`, computed exactly.
///
/// Both CDFs are piecewise linear or piecewise constant between the union
/// of their atom and knot locations, so the supremum of the absolute
/// difference is attained at one of those locations or at a left limit;
/// it suffices to scan them.
pub fn kolmogorov_distance(a: &Distribution, b: &Distribution) -> f64 {
    let mut points: Vec<f64> = a.break_values().chain(b.break_values()).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut sup = 0.0f64;
    for &z in &points {
        sup = sup.max((a.cdf(z) - b.cdf(z)).abs());
        sup = sup.max((a.cdf_left(z) - b.cdf_left(z)).abs());
    }
    sup
}

/// How a perturbation displaces probability mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    ShiftDown,
    ShiftUp,
    RandomMix,
}

impl std::fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PerturbMode::ShiftDown => "shift_down",
            PerturbMode::ShiftUp => "shift_up",
            PerturbMode::RandomMix => "random_mix",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift_down" | "shift-down" => Ok(PerturbMode::ShiftDown),
            "shift_up" | "shift-up" => Ok(PerturbMode::ShiftUp),
            "random_mix" | "random-mix" => Ok(PerturbMode::RandomMix),
            other => Err(Error::InvalidConfig(format!(
                "unknown perturbation mode `{other}`"
            ))),
        }
    }
}

/// A named, seeded perturbation inside a Kolmogorov ball of radius
/// `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub mode: PerturbMode,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64, mode: PerturbMode, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(Self {
            epsilon,
            mode,
            seed,
        })
    }
}

/// Move up to `eps` of mass into the bottom atom (`down`) or the top atom,
/// draining donors from the far end first.
fn shift_discrete(atoms: &[(f64, f64)], eps: f64, down: bool) -> Result<Distribution> {
    if atoms.len() == 1 {
        return Distribution::discrete(atoms.to_vec());
    }
    let mut probs: Vec<f64> = atoms.iter().map(|&(_, p)| p).collect();
    let receiver = if down { 0 } else { probs.len() - 1 };
    let mut left = eps.min(1.0 - probs[receiver]);
    let donor_order: Vec<usize> = if down {
        (1..probs.len()).rev().collect()
    } else {
        (0..probs.len() - 1).collect()
    };
    for j in donor_order {
        if left <= 0.0 {
            break;
        }
        let take = probs[j].min(left);
        probs[j] -= take;
        probs[receiver] += take;
        left -= take;
    }
    let moved: Vec<(f64, f64)> = atoms
        .iter()
        .zip(&probs)
        .filter(|&(_, &p)| p > 0.0)
        .map(|(&(v, _), &p)| (v, p))
        .collect();
    Distribution::discrete(moved)
}

/// Cap the CDF at 1 after adding `eps`: mass drains from the top of the
/// support into an atom at the bottom knot.
fn pwl_shift_down(knots: &[(f64, f64)], eps: f64) -> Result<Distribution> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(knots.len() + 1);
    for w in knots.windows(2) {
        let (v0, f0) = w[0];
        let (v1, f1) = w[1];
        out.push((v0, (f0 + eps).min(1.0)));
        // Keep the kink where the cap starts to bind.
        if f0 + eps < 1.0 && f1 + eps > 1.0 {
            let zc = v0 + (1.0 - eps - f0) * (v1 - v0) / (f1 - f0);
            if v0 < zc && zc < v1 {
                out.push((zc, 1.0));
            }
        }
    }
    out.push((1.0, 1.0));
    Distribution::pwl_cdf(out)
}

/// Lower the CDF by `eps`, tapering the shift to zero across the top half
/// of the final segment so the curve still ends at `(1, 1)`, and clamp at
/// zero. Mass moves toward the top knot.
fn pwl_shift_up(knots: &[(f64, f64)], eps: f64) -> Result<Distribution> {
    let second_last = knots[knots.len() - 2].0;
    let mut taper = 0.5 * (1.0 + second_last);
    if !(second_last < taper && taper < 1.0) {
        taper = second_last;
    }
    let width = 1.0 - taper;
    let shift = |z: f64| -> f64 {
        if z <= taper {
            eps
        } else {
            eps * (1.0 - z) / width
        }
    };

    let mut points: Vec<f64> = knots.iter().map(|&(v, _)| v).collect();
    points.push(taper);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let lowered: Vec<(f64, f64)> = points
        .iter()
        .map(|&z| (z, pwl_eval(knots, z) - shift(z)))
        .collect();

    let mut out: Vec<(f64, f64)> = Vec::with_capacity(lowered.len() + 1);
    for (i, &(z, h)) in lowered.iter().enumerate() {
        out.push((z, h.max(0.0)));
        if i + 1 < lowered.len() {
            let (z1, h1) = lowered[i + 1];
            if h < 0.0 && h1 > 0.0 {
                let zc = z + (0.0 - h) * (z1 - z) / (h1 - h);
                if z < zc && zc < z1 {
                    out.push((zc, 0.0));
                }
            }
        }
    }
    smooth_monotone(&mut out);
    Distribution::pwl_cdf(out)
}

/// Repair sub-ulp monotonicity violations left by independently rounded
/// knot heights, and pin the endpoint heights into range.
fn smooth_monotone(knots: &mut [(f64, f64)]) {
    let k = knots.len();
    for i in 0..k {
        knots[i].1 = knots[i].1.clamp(0.0, 1.0);
        if i > 0 && knots[i].1 < knots[i - 1].1 {
            knots[i].1 = knots[i - 1].1;
        }
    }
    knots[k - 1].1 = 1.0;
}

/// Seeded multiplicative reweighting of atom masses, pulled back toward the
/// original until the CDF displacement fits in the epsilon ball.
fn random_mix_discrete(atoms: &[(f64, f64)], eps: f64, seed: u64) -> Result<Distribution> {
    if atoms.len() == 1 {
        return Distribution::discrete(atoms.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..atoms.len())
        .map(|_| 0.25 + 1.5 * rng.random::<f64>())
        .collect();
    let raw: Vec<f64> = atoms
        .iter()
        .zip(&weights)
        .map(|(&(_, p), &w)| p * w)
        .collect();
    let total: f64 = raw.iter().sum();
    let target: Vec<f64> = raw.iter().map(|q| q / total).collect();

    // Sup-norm of the CDF displacement is attained at the atoms because
    // both step functions share jump locations.
    let mut sup = 0.0f64;
    let (mut cum_p, mut cum_q) = (0.0, 0.0);
    for (&(_, p), &q) in atoms.iter().zip(&target) {
        cum_p += p;
        cum_q += q;
        sup = sup.max((cum_q - cum_p).abs());
    }
    if sup == 0.0 {
        return Distribution::discrete(atoms.to_vec());
    }
    let t = (eps / sup).min(1.0);
    let mixed: Vec<(f64, f64)> = atoms
        .iter()
        .zip(&target)
        .map(|(&(v, p), &q)| (v, (1.0 - t) * p + t * q))
        .collect();
    Distribution::discrete(mixed)
}

/// Seeded jitter of interior knot heights, made monotone, then pulled back
/// toward the original CDF until the displacement fits in the ball.
fn random_mix_pwl(knots: &[(f64, f64)], eps: f64, seed: u64) -> Result<Distribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = knots.len();
    let mut target: Vec<f64> = knots.iter().map(|&(_, f)| f).collect();
    for t in target.iter_mut().take(k - 1) {
        let jitter = eps * 1.5 * (2.0 * rng.random::<f64>() - 1.0);
        *t = (*t + jitter).clamp(0.0, 1.0);
    }
    for i in 1..k {
        if target[i] < target[i - 1] {
            target[i] = target[i - 1];
        }
    }
    target[k - 1] = 1.0;

    let mut sup = 0.0f64;
    for (&(_, f), &g) in knots.iter().zip(&target) {
        sup = sup.max((g - f).abs());
    }
    if sup == 0.0 {
        return Distribution::pwl_cdf(knots.to_vec());
    }
    let t = (eps / sup).min(1.0);
    let mut mixed: Vec<(f64, f64)> = knots
        .iter()
        .zip(&target)
        .map(|(&(v, f), &g)| (v, f + t * (g - f)))
        .collect();
    smooth_monotone(&mut mixed);
    Distribution::pwl_cdf(mixed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern_half() -> Distribution {
        Distribution::discrete(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn cdf_discrete_is_right_continuous() {
        let d = bern_half();
        assert_eq!(d.cdf(0.5), 0.5);
        assert_eq!(d.cdf(0.0), 0.5);
        assert_eq!(d.cdf(-0.1), 0.0);
        assert_eq!(d.cdf(1.0), 1.0);
        assert_eq!(d.cdf_left(0.0), 0.0);
        assert_eq!(d.cdf_left(1.0), 0.5);
    }

    #[test]
    fn cdf_uniform_is_identity() {
        let u = Distribution::uniform();
        assert_eq!(u.cdf(0.25), 0.25);
        assert_eq!(u.cdf(-1.0), 0.0);
        assert_eq!(u.cdf(2.0), 1.0);
    }

    #[test]
    fn cdf_below_single_atom_is_zero() {
        let d = Distribution::point_mass(0.3).unwrap();
        assert_eq!(d.cdf(0.2), 0.0);
        assert_eq!(d.cdf(0.3), 1.0);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(bern_half().mean(), 0.5);
        assert_eq!(Distribution::uniform().mean(), 0.5);
        let d = Distribution::discrete(vec![(0.2, 0.25), (0.6, 0.75)]).unwrap();
        assert!((d.mean() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_handles_atom_at_zero_in_pwl() {
        // Atom of mass 0.5 at 0, then uniform mass on [0, 1].
        let d = Distribution::pwl_cdf(vec![(0.0, 0.5), (1.0, 1.0)]).unwrap();
        assert!((d.mean() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_uniform() {
        let u = Distribution::uniform();
        assert_eq!(u.quantile(0.25), 0.25);
    }

    #[test]
    fn sample_point_mass() {
        let d = Distribution::point_mass(0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..10 {
            assert_eq!(d.sample(&mut rng), 0.7);
        }
    }

    #[test]
    fn sample_mean_matches_clt_band() {
        let d = bern_half();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        let mean = sum / n as f64;
        // 3 standard errors of a Bernoulli(1/2) mean over 1e5 draws.
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = Distribution::pwl_cdf(vec![(0.0, 0.0), (0.4, 0.9), (1.0, 1.0)]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn flat_cdf_segments_carry_no_mass() {
        // Half the mass on [0, 0.3], a gap on (0.3, 0.7), the rest above.
        let d = Distribution::pwl_cdf(vec![(0.0, 0.0), (0.3, 0.5), (0.7, 0.5), (1.0, 1.0)])
            .unwrap();
        assert_eq!(d.quantile(0.5), 0.3);
        assert!(d.quantile(0.5000001) > 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let x = d.sample(&mut rng);
            assert!(x <= 0.3 || x >= 0.7, "sampled {x} inside the gap");
        }
        // Segment integration: mean 0.5, excess over 0.5 is 0.175.
        assert!((d.mean() - 0.5).abs() < 1e-15);
        assert!((crate::reservation::expected_excess(&d, 0.5) - 0.175).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_identical_laws() {
        let d = bern_half();
        assert_eq!(kolmogorov_distance(&d, &d), 0.0);
        let u = Distribution::uniform();
        assert_eq!(kolmogorov_distance(&u, &u), 0.0);
    }

    #[test]
    fn kolmogorov_disjoint_point_masses() {
        let a = Distribution::point_mass(0.3).unwrap();
        let b = Distribution::point_mass(0.7).unwrap();
        assert_eq!(kolmogorov_distance(&a, &b), 1.0);
    }

    #[test]
    fn kolmogorov_bernoulli_gap() {
        let a = bern_half();
        let b = Distribution::discrete(vec![(0.0, 0.6), (1.0, 0.4)]).unwrap();
        assert!((kolmogorov_distance(&a, &b) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_mixed_representations() {
        // Uniform vs point mass at 0.5: |z - [0.5 <= z]| peaks at 0.5
        // where the step jumps from 0 to 1 while the line sits at 0.5.
        let u = Distribution::uniform();
        let p = Distribution::point_mass(0.5).unwrap();
        assert!((kolmogorov_distance(&u, &p) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perturb_zero_epsilon_is_identity() {
        let d = bern_half();
        for mode in [
            PerturbMode::ShiftDown,
            PerturbMode::ShiftUp,
            PerturbMode::RandomMix,
        ] {
            let spec = PerturbationSpec::new(0.0, mode, 9).unwrap();
            assert_eq!(d.perturb(&spec).unwrap(), d);
        }
    }

    #[test]
    fn perturb_shift_down_bernoulli() {
        let d = bern_half();
        let spec = PerturbationSpec::new(0.1, PerturbMode::ShiftDown, 0).unwrap();
        let out = d.perturb(&spec).unwrap();
        let expect = Distribution::discrete(vec![(0.0, 0.6), (1.0, 0.4)]).unwrap();
        assert_eq!(out, expect);
        assert!((kolmogorov_distance(&d, &out) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn perturb_shift_up_bernoulli() {
        let d = bern_half();
        let spec = PerturbationSpec::new(0.1, PerturbMode::ShiftUp, 0).unwrap();
        let out = d.perturb(&spec).unwrap();
        let expect = Distribution::discrete(vec![(0.0, 0.4), (1.0, 0.6)]).unwrap();
        assert_eq!(out, expect);
    }

    #[test]
    fn perturb_drains_whole_atoms_when_needed() {
        let d = Distribution::discrete(vec![(0.0, 0.3), (0.5, 0.3), (1.0, 0.4)]).unwrap();
        let spec = PerturbationSpec::new(0.5, PerturbMode::ShiftDown, 0).unwrap();
        let out = d.perturb(&spec).unwrap();
        // 0.4 taken from the top atom, 0.1 from the middle one.
        let atoms = out.atoms().unwrap();
        assert_eq!(atoms.len(), 2);
        assert!((atoms[0].1 - 0.8).abs() < 1e-15);
        assert!((atoms[1].1 - 0.2).abs() < 1e-15);
        assert!(kolmogorov_distance(&d, &out) <= 0.5 + BALL_SLACK);
    }

    #[test]
    fn perturb_stays_in_ball_across_modes_and_shapes() {
        let dists = vec![
            bern_half(),
            Distribution::uniform(),
            Distribution::discrete(vec![(0.1, 0.2), (0.4, 0.3), (0.9, 0.5)]).unwrap(),
            Distribution::pwl_cdf(vec![(0.0, 0.2), (0.3, 0.4), (0.7, 0.4), (1.0, 1.0)]).unwrap(),
            Distribution::point_mass(0.5).unwrap(),
        ];
        for d in &dists {
            for mode in [
                PerturbMode::ShiftDown,
                PerturbMode::ShiftUp,
                PerturbMode::RandomMix,
            ] {
                for (i, eps) in [0.05, 0.3, 1.0].iter().enumerate() {
                    let spec = PerturbationSpec::new(*eps, mode, 31 + i as u64).unwrap();
                    let out = d.perturb(&spec).unwrap();
                    let dk = kolmogorov_distance(d, &out);
                    assert!(
                        dk <= eps + BALL_SLACK,
                        "mode {mode} eps {eps}: d_K {dk} for {d:?} -> {out:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn perturb_shift_up_moves_pwl_mass_toward_top() {
        let u = Distribution::uniform();
        let spec = PerturbationSpec::new(0.1, PerturbMode::ShiftUp, 0).unwrap();
        let out = u.perturb(&spec).unwrap();
        // Optimistic, never above the original CDF.
        for i in 0..=100 {
            let z = i as f64 / 100.0;
            assert!(out.cdf(z) <= u.cdf(z) + 1e-15);
        }
        assert!((kolmogorov_distance(&u, &out) - 0.1).abs() < 1e-12);
        assert_eq!(out.cdf(1.0), 1.0);
    }

    #[test]
    fn perturb_rejects_bad_epsilon() {
        let d = bern_half();
        let spec = PerturbationSpec {
            epsilon: 1.5,
            mode: PerturbMode::ShiftDown,
            seed: 0,
        };
        assert!(matches!(d.perturb(&spec), Err(Error::InvalidEpsilon(_))));
        assert!(matches!(
            PerturbationSpec::new(-0.1, PerturbMode::ShiftUp, 0),
            Err(Error::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn constructors_reject_invalid_input() {
        assert!(Distribution::discrete(vec![]).is_err());
        assert!(Distribution::discrete(vec![(0.5, 0.5), (0.2, 0.5)]).is_err());
        assert!(Distribution::discrete(vec![(0.0, 0.4), (1.0, 0.4)]).is_err());
        assert!(Distribution::discrete(vec![(1.5, 1.0)]).is_err());
        assert!(Distribution::pwl_cdf(vec![(0.0, 0.0)]).is_err());
        assert!(Distribution::pwl_cdf(vec![(0.1, 0.0), (1.0, 1.0)]).is_err());
        assert!(Distribution::pwl_cdf(vec![(0.0, 0.0), (1.0, 0.9)]).is_err());
        assert!(Distribution::pwl_cdf(vec![(0.0, 0.5), (0.5, 0.2), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn construction_normalizes_tiny_mass_deviation() {
        let p = 0.5 + 4e-13;
        let d = Distribution::discrete(vec![(0.0, p), (1.0, 0.5)]).unwrap();
        let total: f64 = d.atoms().unwrap().iter().map(|&(_, q)| q).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_wire_format() {
        let d = bern_half();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"type":"discrete","atoms":[[0.0,0.5],[1.0,0.5]]}"#);
        let back: Distribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);

        let u = Distribution::uniform();
        let json = serde_json::to_string(&u).unwrap();
        assert_eq!(json, r#"{"type":"pwl_cdf","knots":[[0.0,0.0],[1.0,1.0]]}"#);

        // Deserialization enforces the same invariants as the constructors.
        let bad = r#"{"type":"discrete","atoms":[[0.0,0.4],[1.0,0.4]]}"#;
        assert!(serde_json::from_str::<Distribution>(bad).is_err());
        let unknown = r#"{"type":"discrete","atoms":[[0.0,1.0]],"extra":1}"#;
        assert!(serde_json::from_str::<Distribution>(unknown).is_err());
    }
}
