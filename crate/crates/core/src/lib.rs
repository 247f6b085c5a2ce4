//! Sequential box-opening search with reservation prices.
//!
//! A searcher faces `n` boxes, each holding a hidden value drawn from a
//! known law on `[0, 1]` behind a known opening cost, and wants to maximize
//! the accepted value minus the total cost paid. The optimal rule computes
//! each box's reservation price `sigma` (the threshold where the expected
//! excess `E[(X - sigma)_+]` equals the cost), inspects boxes in descending
//! `sigma` order, and stops as soon as the best value seen reaches the next
//! threshold.
//!
//! This crate implements that model end to end: value distributions with
//! exact Kolmogorov distances and bounded perturbations
//! ([`distribution`]), the reservation solver ([`reservation`]), the
//! policy simulator with three independent expected-utility oracles
//! ([`policy`]), and experiments that measure how the policy degrades when
//! its priors are wrong by at most `epsilon` in Kolmogorov distance
//! ([`robustness`]). The [`checks`] module packages the full verification
//! suite so it can run both under `cargo test` and behind the `check` CLI
//! subcommand.

pub mod checks;
pub mod distribution;
pub mod error;
pub mod io;
pub mod policy;
pub mod reservation;
pub mod robustness;

pub use distribution::{kolmogorov_distance, Distribution, PerturbMode, PerturbationSpec};
pub use error::{Error, Result};
pub use policy::{
    capped_benchmark, conditional_utility, expected_utility_exact, expected_utility_mc,
    inspection_order, run_policy, ThresholdPolicy, Trace, UtilityEstimate,
};
pub use reservation::{
    capped_value, expected_excess, reservation_price, sorted_by_threshold, thresholds, Instance,
    SearchBox,
};
pub use robustness::{
    adversarial_search, hybrid_swap_gaps, regret, run_sweep, stability_gap, InstanceFamily,
    RobustnessReport, SweepConfig,
};
