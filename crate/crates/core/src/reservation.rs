//! Reservation prices and capped values.
//!
//! A box pairs an opening cost with a value law. Its reservation price is
//! the threshold `sigma` at which the expected value excess over the
//! threshold equals the cost: `E[(X - sigma)_+] = cost`. The capped value
//! `min(sigma, X)` is the quantity whose expected maximum characterizes the
//! optimal search utility.

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};

/// Residual tolerance the solver guarantees on `E[(X - sigma)_+] = cost`.
pub const ROOT_TOLERANCE: f64 = 1e-10;

const BISECTION_WIDTH: f64 = 1e-13;

/// A cost paired with a value law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    cost: f64,
    dist: Distribution,
}

impl SearchBox {
    pub fn new(cost: f64, dist: Distribution) -> Result<Self> {
        if !cost.is_finite() || cost < 0.0 {
            return Err(Error::NegativeCost(cost));
        }
        Ok(Self { cost, dist })
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn dist(&self) -> &Distribution {
        &self.dist
    }
}

/// An ordered, nonempty collection of boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    boxes: Vec<SearchBox>,
}

impl Instance {
    pub fn new(boxes: Vec<SearchBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::EmptyInstance);
        }
        Ok(Self { boxes })
    }

    pub fn boxes(&self) -> &[SearchBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    /// Always false: construction requires at least one box.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn costs(&self) -> Vec<f64> {
        self.boxes.iter().map(|b| b.cost()).collect()
    }

    /// True when every box carries a discrete law (exact oracles apply).
    pub fn is_fully_discrete(&self) -> bool {
        self.boxes.iter().all(|b| b.dist().is_discrete())
    }
}

/// Exact `E[(X - sigma)_+]`.
///
/// Linear extension `mean - sigma` below zero, zero at and above the top of
/// the support; in between, an atom sum for discrete laws and closed-form
/// segment integration of `1 - F` for piecewise-linear CDFs.
pub fn expected_excess(d: &Distribution, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return d.mean() - sigma;
    }
    if sigma >= 1.0 {
        return 0.0;
    }
    if let Some(atoms) = d.atoms() {
        return atoms.iter().map(|&(v, p)| p * (v - sigma).max(0.0)).sum();
    }
    let knots = d.knots().expect("distribution is discrete or pwl");
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (a, fa) = w[0];
        let (b, fb) = w[1];
        if b <= sigma {
            continue;
        }
        let s = a.max(sigma);
        let fs = fa + (fb - fa) * (s - a) / (b - a);
        total += (b - s) * (1.0 - 0.5 * (fs + fb));
    }
    total
}

/// The threshold `sigma` with `expected_excess(d, sigma) = cost`.
///
/// Three regimes: zero cost returns the top of the support (the smallest
/// threshold on the zero-excess plateau); costs at or above the mean use
/// the linear extension `mean - cost`; in between, the excess functional is
/// continuous and strictly decreasing, and bisection pins the unique root.
pub fn reservation_price(d: &Distribution, cost: f64) -> Result<f64> {
    if !cost.is_finite() || cost < 0.0 {
        return Err(Error::NegativeCost(cost));
    }
    let sup = d.sup_support();
    if cost == 0.0 {
        return Ok(sup);
    }
    let mean = d.mean();
    if cost >= mean {
        return Ok(mean - cost);
    }
    let mut lo = 0.0;
    let mut hi = sup;
    for _ in 0..200 {
        if hi - lo <= BISECTION_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if expected_excess(d, mid) > cost {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `min(sigma, x)`.
pub fn capped_value(sigma: f64, x: f64) -> f64 {
    sigma.min(x)
}

/// Component-wise reservation prices of an instance.
pub fn thresholds(inst: &Instance) -> Vec<f64> {
    inst.boxes()
        .iter()
        .map(|b| reservation_price(b.dist(), b.cost()).expect("box cost validated at construction"))
        .collect()
}

/// The same instance with boxes stably reordered by descending reservation
/// price (ties keep the smaller original index first).
pub fn sorted_by_threshold(inst: &Instance) -> Instance {
    let sigma = thresholds(inst);
    let order = crate::policy::inspection_order(&sigma);
    let boxes = order.iter().map(|&i| inst.boxes()[i].clone()).collect();
    Instance::new(boxes).expect("reordering preserves nonemptiness")
}
