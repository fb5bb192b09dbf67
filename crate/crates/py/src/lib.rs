//! Python bindings for the htdp-core privacy calculator.
//!
//! The module exposes the three core types (`Design`, `Dataset`,
//! `AdjacentPair`) and the main operations on them: atom distributions,
//! exact delta and its inverse, privacy profiles, Laplace-scale
//! calibration, conditional moments, Monte-Carlo audits, and the
//! closed forms for simple random sampling on binary data.  Library
//! errors surface as `ValueError`.

use htdp_core as hc;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn to_py(e: hc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A without-replacement sampling design over units 0..N-1.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Design {
    inner: hc::Design,
}

#[pymethods]
impl Design {
    /// Simple random sampling of `n` units out of `n_pop`.
    #[staticmethod]
    fn srs(n_pop: usize, n: usize) -> PyResult<Design> {
        let inner = hc::make_srs_design(n_pop, n).map_err(to_py)?;
        Ok(Design { inner })
    }

    /// Explicit design from `(units, probability)` pairs.
    #[staticmethod]
    #[pyo3(signature = (samples, n_pop = None))]
    fn explicit(samples: Vec<(Vec<usize>, f64)>, n_pop: Option<usize>) -> PyResult<Design> {
        let samples = samples
            .into_iter()
            .map(|(units, p)| hc::WeightedSample { units, p })
            .collect();
        let inner = hc::make_explicit_design(samples, n_pop).map_err(to_py)?;
        Ok(Design { inner })
    }

    /// Parse a design from its JSON representation.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Design> {
        let inner = hc::Design::from_json(text).map_err(to_py)?;
        Ok(Design { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n_pop(&self) -> usize {
        self.inner.n_pop()
    }

    #[getter]
    fn support_size(&self) -> usize {
        self.inner.support_size()
    }

    /// First-order inclusion probabilities, one per unit.
    fn inclusion_probabilities(&self) -> Vec<f64> {
        let pi = self.inner.inclusion_probabilities(1);
        (0..self.inner.n_pop()).map(|i| pi.first(i)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Design(n_pop={}, support_size={})",
            self.inner.n_pop(),
            self.inner.support_size()
        )
    }
}

/// A dataset together with its public domain bounds.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: hc::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(
        x: Vec<f64>,
        min_value: f64,
        max_value: f64,
        min_total: f64,
        max_total: f64,
    ) -> PyResult<Dataset> {
        let inner =
            hc::Dataset::new(x, min_value, max_value, min_total, max_total).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    fn total(&self) -> f64 {
        self.inner.total()
    }

    fn __len__(&self) -> usize {
        self.inner.x.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(x={:?})", self.inner.x)
    }
}

/// Two datasets differing only at unit `i`.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct AdjacentPair {
    inner: hc::AdjacentPair,
}

#[pymethods]
impl AdjacentPair {
    #[new]
    fn new(x: Dataset, x_prime: Dataset, i: usize) -> PyResult<AdjacentPair> {
        let inner = hc::AdjacentPair::new(x.inner, x_prime.inner, i).map_err(to_py)?;
        Ok(AdjacentPair { inner })
    }

    #[getter]
    fn i(&self) -> usize {
        self.inner.i()
    }

    fn x(&self) -> Dataset {
        Dataset { inner: self.inner.x().clone() }
    }

    fn x_prime(&self) -> Dataset {
        Dataset { inner: self.inner.x_prime().clone() }
    }

    fn __repr__(&self) -> String {
        format!("AdjacentPair(i={})", self.inner.i())
    }
}

/// Conditional moments of the total estimator with unit `i` held out.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Moments {
    inner: hc::ConditionalMoments,
}

#[pymethods]
impl Moments {
    #[getter]
    fn t_minus_i_given_i(&self) -> f64 {
        self.inner.t_minus_i_given_i
    }

    #[getter]
    fn t_minus_i_given_not_i(&self) -> f64 {
        self.inner.t_minus_i_given_not_i
    }

    #[getter]
    fn var_given_i(&self) -> f64 {
        self.inner.var_given_i
    }

    #[getter]
    fn var_given_not_i(&self) -> f64 {
        self.inner.var_given_not_i
    }

    fn __repr__(&self) -> String {
        format!(
            "Moments(t_minus_i_given_i={}, t_minus_i_given_not_i={}, \
             var_given_i={}, var_given_not_i={})",
            self.inner.t_minus_i_given_i,
            self.inner.t_minus_i_given_not_i,
            self.inner.var_given_i,
            self.inner.var_given_not_i,
        )
    }
}

/// Values and masses of the estimator's atomic law under `design`.
#[pyfunction]
fn atoms(design: &Design, x: &Dataset) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let a = hc::atom_distribution(&design.inner, &x.inner).map_err(to_py)?;
    Ok((a.values().to_vec(), a.masses().to_vec()))
}

/// Exact delta(eps) for one adjacent pair, worst case over both
/// orientations, at Laplace scale `b` (0 means no noise).
#[pyfunction]
fn delta(design: &Design, pair: &AdjacentPair, b: f64, eps: f64) -> PyResult<f64> {
    hc::delta(&design.inner, &pair.inner, b, eps).map_err(to_py)
}

/// Smallest eps with delta(eps) <= delta_target for one adjacent pair,
/// worst case over both orientations.  Returns +inf when no eps in
/// [0, eps_hi] attains the target.
#[pyfunction]
#[pyo3(signature = (design, pair, b, delta_target, eps_hi = 60.0))]
fn epsilon_at_delta(
    design: &Design,
    pair: &AdjacentPair,
    b: f64,
    delta_target: f64,
    eps_hi: f64,
) -> PyResult<f64> {
    let mx = mixture(design, pair.inner.x(), b)?;
    let mxp = mixture(design, pair.inner.x_prime(), b)?;
    let fwd = hc::epsilon_at_delta(&mx, &mxp, delta_target, eps_hi).map_err(to_py)?;
    let rev = hc::epsilon_at_delta(&mxp, &mx, delta_target, eps_hi).map_err(to_py)?;
    Ok(fwd.max(rev))
}

fn mixture(design: &Design, x: &hc::Dataset, b: f64) -> PyResult<hc::LaplaceMixture> {
    let a = hc::atom_distribution(&design.inner, x).map_err(to_py)?;
    hc::LaplaceMixture::new(a, b).map_err(to_py)
}

/// Privacy profile over an epsilon grid, worst case over `pairs`,
/// serialized as JSON.
#[pyfunction]
fn profile_json(
    design: &Design,
    pairs: Vec<AdjacentPair>,
    b: f64,
    eps_grid: Vec<f64>,
) -> PyResult<String> {
    let pairs: Vec<hc::AdjacentPair> = pairs.into_iter().map(|p| p.inner).collect();
    let prof = hc::profile(&design.inner, &pairs, b, &eps_grid).map_err(to_py)?;
    serde_json::to_string(&prof).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Smallest Laplace scale b with worst-case delta(eps) <= delta_target.
/// Returns `(b, delta_at_b, monotone)`.
#[pyfunction]
fn calibrate(
    design: &Design,
    pairs: Vec<AdjacentPair>,
    eps: f64,
    delta_target: f64,
) -> PyResult<(f64, f64, bool)> {
    let pairs: Vec<hc::AdjacentPair> = pairs.into_iter().map(|p| p.inner).collect();
    let cal = hc::calibrate_b(&design.inner, &pairs, eps, delta_target).map_err(to_py)?;
    Ok((cal.b, cal.delta_at_b, cal.monotone))
}

/// Mean and variance of the held-out total, conditional on unit `i`
/// being selected and on it being left out.
#[pyfunction]
#[pyo3(signature = (design, x, i, allow_census = false))]
fn conditional_moments(
    design: &Design,
    x: &Dataset,
    i: usize,
    allow_census: bool,
) -> PyResult<Moments> {
    let inner =
        hc::conditional_moments(&design.inner, &x.inner, i, allow_census).map_err(to_py)?;
    Ok(Moments { inner })
}

/// Monte-Carlo estimate of delta(eps) for one orientation of `pair`.
/// Returns `(delta_hat, se)`.
#[pyfunction]
fn mc_delta(
    design: &Design,
    pair: &AdjacentPair,
    b: f64,
    eps: f64,
    trials: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let est = hc::mc_delta(&design.inner, &pair.inner, b, eps, trials, seed).map_err(to_py)?;
    Ok((est.delta_hat, est.se))
}

/// Candidate worst-case adjacent pairs anchored at every unit, built
/// from the public domain bounds.
#[pyfunction]
fn extremal_pairs(
    design: &Design,
    min_value: f64,
    max_value: f64,
    min_total: f64,
    max_total: f64,
) -> PyResult<Vec<AdjacentPair>> {
    let pairs = hc::extremal_pairs_all_units(
        &design.inner,
        min_value,
        max_value,
        min_total,
        max_total,
    )
    .map_err(to_py)?;
    Ok(pairs.into_iter().map(|inner| AdjacentPair { inner }).collect())
}

/// Closed-form delta(eps) for noiseless simple random sampling on
/// binary data with totals bounded by [mt, mt_max].
#[pyfunction]
fn srs_delta(n_pop: u64, n: u64, mt: u64, mt_max: u64, eps: f64) -> PyResult<f64> {
    let cfg = hc::SrsBinaryConfig::new(n_pop, n, mt, mt_max).map_err(to_py)?;
    Ok(hc::delta_srs_b0(&cfg, eps))
}

/// Closed-form smallest eps with delta(eps) = 0 for the same setting;
/// +inf when pure eps-privacy is unattainable.
#[pyfunction]
fn srs_epsilon_at_delta0(n_pop: u64, n: u64, mt: u64, mt_max: u64) -> PyResult<f64> {
    let cfg = hc::SrsBinaryConfig::new(n_pop, n, mt, mt_max).map_err(to_py)?;
    Ok(hc::epsilon_srs_b0_delta0(&cfg))
}

/// Closed-form smallest eps with delta(eps) <= delta_target for the
/// same setting.
#[pyfunction]
fn srs_epsilon(n_pop: u64, n: u64, mt: u64, mt_max: u64, delta_target: f64) -> PyResult<f64> {
    let cfg = hc::SrsBinaryConfig::new(n_pop, n, mt, mt_max).map_err(to_py)?;
    hc::epsilon_srs_b0(&cfg, delta_target).map_err(to_py)
}

#[pymodule]
fn htdp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Design>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<AdjacentPair>()?;
    m.add_class::<Moments>()?;
    m.add_function(wrap_pyfunction!(atoms, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_at_delta, m)?)?;
    m.add_function(wrap_pyfunction!(profile_json, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_moments, m)?)?;
    m.add_function(wrap_pyfunction!(mc_delta, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(srs_delta, m)?)?;
    m.add_function(wrap_pyfunction!(srs_epsilon_at_delta0, m)?)?;
    m.add_function(wrap_pyfunction!(srs_epsilon, m)?)?;
    Ok(())
}
