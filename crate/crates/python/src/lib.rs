//! Python bindings: samples, conditional depth, quantiles, depth sets,
//! spread profiles and bandwidth selection.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use funq::bandwidth::{select_bandwidth as select_bandwidth_rs, BandwidthGrid, CvConfig};
use funq::data_io::{load_panel, PanelSchema};
use funq::depth::{d2_spread as d2_spread_rs, maximal_depth_set as depth_set_rs, spread_profile as spread_rs};
use funq::simulation::{generate, LocationScale, SimConfig, SimModel};
use funq::{
    spatial_depth_hat, CoefVector, Curve, FitStatus, FunctionalSample, FunqError, Grid, KernelSpec,
    QuantileFit, QuantileProblem, SolverConfig, TauSpec, WeightVector,
};

fn err(e: FunqError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kernel(name: &str) -> PyResult<KernelSpec> {
    name.parse().map_err(err)
}

fn tau_spec(tau: Option<Vec<f64>>, tau_u1: Option<f64>) -> PyResult<TauSpec> {
    match (tau, tau_u1) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("give either tau or tau_u1, not both")),
        (Some(c), None) => Ok(TauSpec::Coefficients(c)),
        (None, Some(s)) => Ok(TauSpec::FirstComponent(s)),
        (None, None) => Ok(TauSpec::Zero),
    }
}

/// Paired covariate and response curves on uniform grids.
#[pyclass(name = "Sample", module = "funq_py", frozen)]
struct PySample {
    inner: FunctionalSample,
    units: Vec<String>,
}

impl PySample {
    fn curve(&self, values: Vec<f64>, covariate: bool) -> PyResult<Curve> {
        let grid = if covariate {
            self.inner.covariate_grid()
        } else {
            self.inner.response_grid()
        };
        Curve::new(grid, values).map_err(err)
    }
}

fn grid_for(count: usize, start: f64, end: f64) -> PyResult<Grid> {
    if count == 1 {
        Ok(Grid::point(start))
    } else {
        Grid::new(start, end, count).map_err(err)
    }
}

#[pymethods]
impl PySample {
    /// Rows of `covariates` and `responses` are curves sampled on
    /// `[start, end]`; a single column means scalar observations.
    #[new]
    #[pyo3(signature = (covariates, responses, start=0.0, end=1.0))]
    fn new(covariates: Vec<Vec<f64>>, responses: Vec<Vec<f64>>, start: f64, end: f64) -> PyResult<Self> {
        let build = |rows: Vec<Vec<f64>>| -> PyResult<Vec<Curve>> {
            let count = rows.first().map_or(0, Vec::len);
            let grid = grid_for(count, start, end)?;
            rows.into_iter()
                .map(|r| Curve::new(grid, r).map_err(err))
                .collect()
        };
        let inner = FunctionalSample::new(build(covariates)?, build(responses)?).map_err(err)?;
        let units = (0..inner.len()).map(|i| i.to_string()).collect();
        Ok(Self { inner, units })
    }

    /// Load a long-format panel CSV.
    #[staticmethod]
    #[pyo3(signature = (path, schema="unit,time,x,y"))]
    fn from_panel(path: &str, schema: &str) -> PyResult<Self> {
        let schema: PanelSchema = schema.parse().map_err(err)?;
        let panel = load_panel(path, &schema).map_err(err)?;
        Ok(Self {
            inner: panel.sample,
            units: panel.units,
        })
    }

    /// Simulated sample; `model` is "hetero" or "locscale".
    #[staticmethod]
    #[pyo3(signature = (n=100, grid_count=101, seed=1, model="hetero"))]
    fn simulate(n: usize, grid_count: usize, seed: u64, model: &str) -> PyResult<Self> {
        let model = match model {
            "hetero" => SimModel::Heteroscedastic,
            "locscale" => SimModel::LocationScale(LocationScale::identity_mean_unit_scale()),
            other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
        };
        let cfg = SimConfig {
            n,
            grid: Grid::unit(grid_count).map_err(err)?,
            seed,
            model,
        };
        let inner = generate(&cfg).map_err(err)?;
        let units = (0..inner.len()).map(|i| i.to_string()).collect();
        Ok(Self { inner, units })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Sample(n={}, grid_count={})",
            self.inner.len(),
            self.inner.response_grid().count()
        )
    }

    #[getter]
    fn units(&self) -> Vec<String> {
        self.units.clone()
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.response_grid().points()
    }

    fn covariates(&self) -> Vec<Vec<f64>> {
        self.inner.covariates().iter().map(|c| c.values().to_vec()).collect()
    }

    fn responses(&self) -> Vec<Vec<f64>> {
        self.inner.responses().iter().map(|c| c.values().to_vec()).collect()
    }
}

fn fit_dict<'py>(py: Python<'py>, fit: &QuantileFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("point", fit.point.0.clone())?;
    if let Some(c) = &fit.curve {
        d.set_item("curve", c.values().to_vec())?;
    }
    let (status, index) = match fit.status {
        FitStatus::CandidatePoint(i) => ("candidate", Some(i)),
        FitStatus::NewtonConverged => ("newton", None),
        FitStatus::MaxIterations => ("max_iterations", None),
    };
    d.set_item("status", status)?;
    d.set_item("candidate_index", index)?;
    d.set_item("iterations", fit.iterations)?;
    d.set_item("gradient_norm", fit.final_gradient_norm)?;
    d.set_item("objective", fit.objective)?;
    Ok(d)
}

/// Spatial quantile of weighted points in coordinates (no basis).
#[pyfunction]
#[pyo3(signature = (points, tau, weights=None))]
fn solve<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    tau: Vec<f64>,
    weights: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let w = match weights {
        Some(w) => WeightVector::new(w).map_err(err)?,
        None => WeightVector::uniform(points.len()),
    };
    let problem = QuantileProblem::new(CoefVector(tau), points, w).map_err(err)?;
    let fit = funq::solve(&problem, &SolverConfig::default(), None).map_err(err)?;
    fit_dict(py, &fit)
}

/// Conditional spatial depth of response curve `y` given covariate `x0`.
#[pyfunction]
#[pyo3(signature = (sample, y, x0, h, kernel_name="indicator"))]
fn spatial_depth(sample: &PySample, y: Vec<f64>, x0: Vec<f64>, h: f64, kernel_name: &str) -> PyResult<f64> {
    let y = sample.curve(y, false)?;
    let x0 = sample.curve(x0, true)?;
    spatial_depth_hat(&y, &x0, &sample.inner, h, kernel(kernel_name)?).map_err(err)
}

/// Conditional spatial quantile curve. `tau` gives basis coefficients,
/// `tau_u1` a multiple of the first eigenfunction; neither means the median.
#[pyfunction]
#[pyo3(signature = (sample, x0, h, tau=None, tau_u1=None, kernel_name="indicator"))]
fn conditional_quantile<'py>(
    py: Python<'py>,
    sample: &PySample,
    x0: Vec<f64>,
    h: f64,
    tau: Option<Vec<f64>>,
    tau_u1: Option<f64>,
    kernel_name: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let x0 = sample.curve(x0, true)?;
    let tau = tau_spec(tau, tau_u1)?;
    let fit = funq::conditional_quantile(
        &sample.inner,
        &x0,
        h,
        kernel(kernel_name)?,
        &tau,
        &SolverConfig::default(),
    )
    .map_err(err)?;
    fit_dict(py, &fit)
}

/// Deepest observations carrying a fraction `p` of the kernel weight at `x0`.
#[pyfunction]
#[pyo3(signature = (sample, x0, p, h, kernel_name="indicator"))]
fn maximal_depth_set<'py>(
    py: Python<'py>,
    sample: &PySample,
    x0: Vec<f64>,
    p: f64,
    h: f64,
    kernel_name: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let x0 = sample.curve(x0, true)?;
    let set = depth_set_rs(&sample.inner, &x0, p, h, kernel(kernel_name)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("members", set.selected().to_vec())?;
    d.set_item("ordered_indices", set.ordered_indices.clone())?;
    d.set_item("depths", set.depths.clone())?;
    d.set_item("cutoff", set.cutoff)?;
    d.set_item("d1", set.d1)?;
    Ok(d)
}

/// Distance between the quantiles at `tau_u1 * e_1` and its negative.
#[pyfunction]
#[pyo3(signature = (sample, x0, h, tau_u1=0.5, kernel_name="indicator"))]
fn d2_spread(sample: &PySample, x0: Vec<f64>, h: f64, tau_u1: f64, kernel_name: &str) -> PyResult<f64> {
    let x0 = sample.curve(x0, true)?;
    d2_spread_rs(
        &sample.inner,
        &x0,
        &TauSpec::FirstComponent(tau_u1),
        h,
        kernel(kernel_name)?,
        &SolverConfig::default(),
    )
    .map_err(err)
}

/// D1 and D2 at every covariate, ordered by covariate-norm rank.
#[pyfunction]
#[pyo3(signature = (sample, h, p=0.5, tau_u1=0.5, kernel_name="indicator"))]
fn spread_profile<'py>(
    py: Python<'py>,
    sample: &PySample,
    h: f64,
    p: f64,
    tau_u1: f64,
    kernel_name: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let prof = py
        .detach(|| {
            spread_rs(
                &sample.inner,
                p,
                tau_u1,
                h,
                kernel(kernel_name).map_err(|e| FunqError::InvalidArgument(e.to_string()))?,
                &SolverConfig::default(),
            )
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("rank", prof.covariate_ranks())?;
    d.set_item("index", prof.points.iter().map(|p| p.index).collect::<Vec<_>>())?;
    d.set_item("d1", prof.d1_values())?;
    d.set_item("d2", prof.d2_values())?;
    d.set_item(
        "missing",
        prof.missing
            .iter()
            .map(|m| (m.index, m.reason.clone()))
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Leave-one-out bandwidth selection; `candidates=None` uses the automatic
/// grid of pairwise-distance deciles.
#[pyfunction]
#[pyo3(signature = (sample, candidates=None, kernel_name="indicator"))]
fn select_bandwidth<'py>(
    py: Python<'py>,
    sample: &PySample,
    candidates: Option<Vec<f64>>,
    kernel_name: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = candidates.map_or(BandwidthGrid::Auto, BandwidthGrid::Explicit);
    let spec = kernel(kernel_name)?;
    let cv = py
        .detach(|| select_bandwidth_rs(&sample.inner, &grid, spec, &CvConfig::default()))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("h_opt", cv.h_opt)?;
    d.set_item("scores", cv.scores.clone())?;
    d.set_item("infeasible", cv.infeasible.clone())?;
    Ok(d)
}

#[pymodule]
fn funq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(spatial_depth, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(maximal_depth_set, m)?)?;
    m.add_function(wrap_pyfunction!(d2_spread, m)?)?;
    m.add_function(wrap_pyfunction!(spread_profile, m)?)?;
    m.add_function(wrap_pyfunction!(select_bandwidth, m)?)?;
    Ok(())
}
