//! Python bindings for the reservation-price search library.
//!
//! Exposes the main types and operations in-process: distributions with
//! Kolmogorov distances and bounded perturbations, instances with
//! reservation prices, the policy simulator with its exact / capped /
//! Monte Carlo oracles, and the robustness experiments.
//!
//! Usage from Python:
//!
//!     import pandora_py as pb
//!     inst = pb.Instance([(0.25, pb.Distribution.bernoulli(0.5))])
//!     inst.thresholds()        # [0.5]
//!     inst.eval_exact()        # 0.25
//!     inst.regret(inst.perturb(0.05, "shift_down", seed=0))

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pandora_core::distribution::PerturbationSpec;
use pandora_core::{checks, distribution, io, policy, reservation, robustness};

fn value_err(e: pandora_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<distribution::PerturbMode> {
    mode.parse().map_err(value_err)
}

/// A value law on [0, 1]: discrete atoms or a piecewise-linear CDF.
#[pyclass(name = "Distribution", frozen, from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: distribution::Distribution,
}

#[pymethods]
impl PyDistribution {
    /// Discrete law from [(value, probability), ...].
    #[staticmethod]
    fn discrete(atoms: Vec<(f64, f64)>) -> PyResult<Self> {
        distribution::Distribution::discrete(atoms)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Continuous law from CDF knots [(value, cdf), ...].
    #[staticmethod]
    fn pwl_cdf(knots: Vec<(f64, f64)>) -> PyResult<Self> {
        distribution::Distribution::pwl_cdf(knots)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn uniform() -> Self {
        Self {
            inner: distribution::Distribution::uniform(),
        }
    }

    #[staticmethod]
    fn point_mass(value: f64) -> PyResult<Self> {
        distribution::Distribution::point_mass(value)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Mass p at 1 and 1 - p at 0.
    #[staticmethod]
    fn bernoulli(p: f64) -> PyResult<Self> {
        distribution::Distribution::bernoulli(p)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Parse the JSON wire format, e.g.
    /// `{"type":"discrete","atoms":[[0.0,0.5],[1.0,0.5]]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_parse(text).map(|inner| Self { inner })
    }

    fn to_json(&self) -> String {
        serde_render(&self.inner)
    }

    fn is_discrete(&self) -> bool {
        self.inner.is_discrete()
    }

    /// P[X <= z].
    fn cdf(&self, z: f64) -> f64 {
        self.inner.cdf(z)
    }

    /// P[X < z].
    fn cdf_left(&self, z: f64) -> f64 {
        self.inner.cdf_left(z)
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn sup_support(&self) -> f64 {
        self.inner.sup_support()
    }

    /// Smallest z with F(z) >= u.
    fn quantile(&self, u: f64) -> f64 {
        self.inner.quantile(u)
    }

    /// Seeded inverse-CDF draws.
    #[pyo3(signature = (seed, count = 1))]
    fn sample(&self, seed: u64, count: usize) -> Vec<f64> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.inner.sample(&mut rng)).collect()
    }

    /// sup_z |F(z) - F_other(z)|, exact.
    fn kolmogorov_distance(&self, other: &PyDistribution) -> f64 {
        distribution::kolmogorov_distance(&self.inner, &other.inner)
    }

    /// A law within `epsilon` in Kolmogorov distance; mode is one of
    /// "shift_down", "shift_up", "random_mix".
    #[pyo3(signature = (epsilon, mode, seed = 0))]
    fn perturb(&self, epsilon: f64, mode: &str, seed: u64) -> PyResult<Self> {
        let spec = PerturbationSpec::new(epsilon, parse_mode(mode)?, seed).map_err(value_err)?;
        self.inner
            .perturb(&spec)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn serde_parse(text: &str) -> PyResult<distribution::Distribution> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn serde_render(d: &distribution::Distribution) -> String {
    serde_json::to_string(d).expect("distribution serializes")
}

/// One realized run of the policy.
#[pyclass(name = "Trace", frozen)]
struct PyTrace {
    inner: policy::Trace,
}

#[pymethods]
impl PyTrace {
    /// Opened box indices (0-based), in inspection order.
    #[getter]
    fn opened(&self) -> Vec<usize> {
        self.inner.opened.clone()
    }

    /// Accepted box index (0-based), or None.
    #[getter]
    fn accepted(&self) -> Option<usize> {
        self.inner.accepted
    }

    #[getter]
    fn values_seen(&self) -> Vec<f64> {
        self.inner.values_seen.clone()
    }

    #[getter]
    fn utility(&self) -> f64 {
        self.inner.utility
    }

    /// The line-oriented text record (1-based indices).
    fn record(&self) -> String {
        io::trace_record(&self.inner)
    }

    fn __repr__(&self) -> String {
        io::trace_record(&self.inner)
    }
}

/// A Monte Carlo utility estimate.
#[pyclass(name = "UtilityEstimate", frozen)]
struct PyUtilityEstimate {
    inner: policy::UtilityEstimate,
}

#[pymethods]
impl PyUtilityEstimate {
    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean
    }

    #[getter]
    fn stderr(&self) -> f64 {
        self.inner.stderr
    }

    #[getter]
    fn trials(&self) -> u32 {
        self.inner.trials
    }

    /// (low, high) 95% confidence interval.
    #[getter]
    fn ci95(&self) -> (f64, f64) {
        self.inner.ci95
    }

    fn __repr__(&self) -> String {
        format!(
            "UtilityEstimate(mean={}, stderr={}, trials={})",
            self.inner.mean, self.inner.stderr, self.inner.trials
        )
    }
}

/// Robustness comparison of a true instance against perturbed beliefs.
#[pyclass(name = "RobustnessReport", frozen)]
struct PyRobustnessReport {
    inner: robustness::RobustnessReport,
}

#[pymethods]
impl PyRobustnessReport {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn stability_gap(&self) -> f64 {
        self.inner.stability_gap
    }

    #[getter]
    fn regret(&self) -> f64 {
        self.inner.regret
    }

    /// n * epsilon.
    #[getter]
    fn bound(&self) -> f64 {
        self.inner.bound
    }

    #[getter]
    fn gap_ratio(&self) -> f64 {
        self.inner.gap_ratio
    }

    #[getter]
    fn regret_ratio(&self) -> f64 {
        self.inner.regret_ratio
    }

    #[getter]
    fn per_box_gaps(&self) -> Vec<f64> {
        self.inner.per_box_gaps.clone()
    }

    fn csv_row(&self) -> String {
        self.inner.csv_row()
    }

    fn __repr__(&self) -> String {
        format!(
            "RobustnessReport(n={}, epsilon={}, stability_gap={}, regret={}, bound={})",
            self.inner.n,
            self.inner.epsilon,
            self.inner.stability_gap,
            self.inner.regret,
            self.inner.bound
        )
    }
}

/// An ordered collection of (cost, distribution) boxes.
#[pyclass(name = "Instance", frozen, skip_from_py_object)]
struct PyInstance {
    inner: reservation::Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    fn new(boxes: Vec<(f64, PyDistribution)>) -> PyResult<Self> {
        let boxes: Result<Vec<_>, _> = boxes
            .into_iter()
            .map(|(cost, d)| reservation::SearchBox::new(cost, d.inner))
            .collect();
        reservation::Instance::new(boxes.map_err(value_err)?)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Parse the versioned instance file format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::instance_from_json(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        io::instance_to_json(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn costs(&self) -> Vec<f64> {
        self.inner.costs()
    }

    fn distributions(&self) -> Vec<PyDistribution> {
        self.inner
            .boxes()
            .iter()
            .map(|b| PyDistribution {
                inner: b.dist().clone(),
            })
            .collect()
    }

    /// Per-box reservation prices.
    fn thresholds(&self) -> Vec<f64> {
        reservation::thresholds(&self.inner)
    }

    /// Descending-threshold inspection order (0-based).
    fn inspection_order(&self) -> Vec<usize> {
        policy::inspection_order(&reservation::thresholds(&self.inner))
    }

    /// A copy with boxes reordered by descending reservation price.
    fn sorted_by_threshold(&self) -> Self {
        Self {
            inner: reservation::sorted_by_threshold(&self.inner),
        }
    }

    /// Run the policy on realized values; thresholds default to the
    /// reservation prices.
    #[pyo3(signature = (values, tau = None))]
    fn simulate(&self, values: Vec<f64>, tau: Option<Vec<f64>>) -> PyResult<PyTrace> {
        let policy = self.policy_for(tau)?;
        policy::run_policy(&policy, &self.inner.costs(), &values)
            .map(|inner| PyTrace { inner })
            .map_err(value_err)
    }

    /// Exact expected utility by support enumeration (discrete laws only).
    #[pyo3(signature = (tau = None))]
    fn eval_exact(&self, tau: Option<Vec<f64>>) -> PyResult<f64> {
        let policy = self.policy_for(tau)?;
        policy::expected_utility_exact(&policy, &self.inner).map_err(value_err)
    }

    /// E[max(0, max_i min(sigma_i, X_i))].
    fn capped_benchmark(&self) -> PyResult<f64> {
        policy::capped_benchmark(&self.inner).map_err(value_err)
    }

    /// Seeded Monte Carlo estimate of the expected utility.
    #[pyo3(signature = (trials, seed = 0, tau = None))]
    fn eval_mc(
        &self,
        trials: u32,
        seed: u64,
        tau: Option<Vec<f64>>,
    ) -> PyResult<PyUtilityEstimate> {
        if trials < 2 {
            return Err(PyValueError::new_err("trials must be at least 2"));
        }
        let policy = self.policy_for(tau)?;
        policy::expected_utility_mc(&policy, &self.inner, trials, seed)
            .map(|inner| PyUtilityEstimate { inner })
            .map_err(value_err)
    }

    /// Expected utility with a realized prefix and one pinned value,
    /// averaging over the remaining boxes.
    fn conditional_utility(&self, prefix_values: Vec<f64>, x: f64) -> PyResult<f64> {
        let policy = self.policy_for(None)?;
        policy::conditional_utility(&policy, &self.inner, &prefix_values, x).map_err(value_err)
    }

    /// Perturb every box within `epsilon` in Kolmogorov distance.
    #[pyo3(signature = (epsilon, mode, seed = 0))]
    fn perturb(&self, epsilon: f64, mode: &str, seed: u64) -> PyResult<Self> {
        robustness::perturb_instance(&self.inner, epsilon, parse_mode(mode)?, seed)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// |W_sigma(self) - W_sigma(perturbed)| under this instance's policy.
    fn stability_gap(&self, perturbed: &PyInstance) -> PyResult<f64> {
        robustness::stability_gap(&self.inner, &perturbed.inner).map_err(value_err)
    }

    /// Utility lost by planning with the believed instance's thresholds.
    fn regret(&self, believed: &PyInstance) -> PyResult<f64> {
        robustness::regret(&self.inner, &believed.inner).map_err(value_err)
    }

    /// Telescoping box-by-box swap gaps against a perturbed instance.
    fn hybrid_swap_gaps(&self, perturbed: &PyInstance) -> PyResult<Vec<f64>> {
        robustness::hybrid_swap_gaps(&self.inner, &perturbed.inner).map_err(value_err)
    }

    /// Full report (stability gap, regret, per-box gaps, ratios) against a
    /// believed instance inside an epsilon ball.
    #[pyo3(signature = (believed, epsilon, mode = "manual", seed = 0))]
    fn report(
        &self,
        believed: &PyInstance,
        epsilon: f64,
        mode: &str,
        seed: u64,
    ) -> PyResult<PyRobustnessReport> {
        robustness::evaluate_pair(&self.inner, &believed.inner, epsilon, mode, seed)
            .map(|inner| PyRobustnessReport { inner })
            .map_err(value_err)
    }

    /// Hill-climbing regret maximization over per-box shifts inside the
    /// epsilon ball.
    #[pyo3(signature = (epsilon, budget = 200, seed = 0))]
    fn adversarial_search(
        &self,
        epsilon: f64,
        budget: u32,
        seed: u64,
    ) -> PyResult<PyRobustnessReport> {
        robustness::adversarial_search(&self.inner, epsilon, budget, seed)
            .map(|inner| PyRobustnessReport { inner })
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={})", self.inner.len())
    }
}

impl PyInstance {
    fn policy_for(&self, tau: Option<Vec<f64>>) -> PyResult<policy::ThresholdPolicy> {
        match tau {
            Some(tau) => policy::ThresholdPolicy::new(tau).map_err(value_err),
            None => Ok(policy::ThresholdPolicy::from_instance(&self.inner)),
        }
    }
}

/// E[(X - sigma)_+].
#[pyfunction]
fn expected_excess(dist: &PyDistribution, sigma: f64) -> f64 {
    reservation::expected_excess(&dist.inner, sigma)
}

/// The threshold sigma with E[(X - sigma)_+] = cost.
#[pyfunction]
fn reservation_price(dist: &PyDistribution, cost: f64) -> PyResult<f64> {
    reservation::reservation_price(&dist.inner, cost).map_err(value_err)
}

/// min(sigma, x).
#[pyfunction]
fn capped_value(sigma: f64, x: f64) -> f64 {
    reservation::capped_value(sigma, x)
}

/// sup_z |F_a(z) - F_b(z)|, exact.
#[pyfunction]
fn kolmogorov_distance(a: &PyDistribution, b: &PyDistribution) -> f64 {
    distribution::kolmogorov_distance(&a.inner, &b.inner)
}

/// Run a robustness sweep from a JSON config; returns the CSV document.
#[pyfunction]
fn run_sweep_csv(config_json: &str) -> PyResult<String> {
    let config = io::sweep_config_from_json(config_json).map_err(value_err)?;
    let reports = robustness::run_sweep(&config).map_err(value_err)?;
    Ok(robustness::reports_to_csv(&reports))
}

/// Run the verification suites; returns (name, passed, detail) triples.
#[pyfunction]
#[pyo3(signature = (seed = checks::DEFAULT_SEED))]
fn run_checks(seed: u64) -> Vec<(String, bool, String)> {
    checks::run_all(seed)
        .into_iter()
        .map(|o| (o.name.to_string(), o.passed, o.detail))
        .collect()
}

#[pymodule]
fn pandora_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyUtilityEstimate>()?;
    m.add_class::<PyRobustnessReport>()?;
    m.add_function(wrap_pyfunction!(expected_excess, m)?)?;
    m.add_function(wrap_pyfunction!(reservation_price, m)?)?;
    m.add_function(wrap_pyfunction!(capped_value, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_distance, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
