//! Python bindings: load a case, clear it, read prices and settlements.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use umpclear::ccg::CcgLimits;
use umpclear::market::{self, Mode, RunConfig};
use umpclear::model::{load_case, load_case_file, SystemCase};
use umpclear::optim::{solver_from_env, Solver};
use umpclear::report;
use umpclear::scuc::line_capacities;
use umpclear::settlement::{ftr_settle, ftr_sft, FtrPortfolio};

create_exception!(pyumpclear, ClearingError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    ClearingError::new_err(e.to_string())
}

/// Round-trips through `json.loads` so nested results arrive as plain dicts and lists.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn solver() -> PyResult<Box<dyn Solver>> {
    solver_from_env().map_err(err)
}

/// A network, its units and the load forecast with uncertainty bounds.
#[pyclass(module = "pyumpclear", name = "Case", skip_from_py_object)]
#[derive(Clone)]
struct PyCase {
    inner: SystemCase,
}

#[pymethods]
impl PyCase {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_case_file(path).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        load_case(text).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn buses(&self) -> usize {
        self.inner.buses
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    #[getter]
    fn unit_ids(&self) -> Vec<String> {
        self.inner.units.iter().map(|u| u.id.clone()).collect()
    }

    #[getter]
    fn line_ids(&self) -> Vec<String> {
        self.inner.lines.iter().map(|l| l.id.clone()).collect()
    }

    /// Interval half-widths, indexed `[bus][hour]`.
    #[getter]
    fn uncertainty(&self) -> Vec<Vec<f64>> {
        self.inner.uncertainty.clone()
    }

    fn bus_loads(&self, hour: usize) -> PyResult<Vec<f64>> {
        if hour >= self.inner.horizon {
            return Err(PyValueError::new_err(format!(
                "hour {hour} outside 0..{}",
                self.inner.horizon
            )));
        }
        Ok(self.inner.bus_loads(hour))
    }

    fn __repr__(&self) -> String {
        format!(
            "Case(name={:?}, buses={}, units={}, horizon={})",
            self.inner.name,
            self.inner.buses,
            self.inner.units.len(),
            self.inner.horizon
        )
    }
}

/// Outcome of one clearing run. Matrices are indexed `[bus or unit][hour]`, hours from 0.
#[pyclass(module = "pyumpclear", name = "MarketRun")]
struct PyMarketRun {
    case: SystemCase,
    run: market::MarketRun,
}

#[pymethods]
impl PyMarketRun {
    #[getter]
    fn cost(&self) -> f64 {
        self.run.cost
    }

    #[getter]
    fn pricing_cost(&self) -> f64 {
        self.run.rsced_cost
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.run.log.iterations()
    }

    #[getter]
    fn lmp(&self) -> Vec<Vec<f64>> {
        self.run.prices.lmp.clone()
    }

    #[getter]
    fn ump_up(&self) -> Vec<Vec<f64>> {
        self.run.prices.ump_up.clone()
    }

    #[getter]
    fn ump_down(&self) -> Vec<Vec<f64>> {
        self.run.prices.ump_down.clone()
    }

    #[getter]
    fn commitment(&self) -> Vec<Vec<bool>> {
        self.run.schedule.commitment.clone()
    }

    #[getter]
    fn dispatch(&self) -> Vec<Vec<f64>> {
        self.run.schedule.dispatch.clone()
    }

    #[getter]
    fn reserve_up(&self) -> Vec<Vec<f64>> {
        self.run.schedule.reserve_up.clone()
    }

    #[getter]
    fn reserve_down(&self) -> Vec<Vec<f64>> {
        self.run.schedule.reserve_down.clone()
    }

    #[getter]
    fn flows(&self) -> Vec<Vec<f64>> {
        self.run.schedule.flows.clone()
    }

    /// Worst-case deviations found by the cutting-plane loop, each `[bus][hour]`.
    #[getter]
    fn pool(&self) -> Vec<Vec<Vec<f64>>> {
        self.run.pool.iter().map(|s| s.values.clone()).collect()
    }

    #[getter]
    fn reserve_credits(&self) -> Vec<Vec<f64>> {
        self.run.settlement.reserve.clone()
    }

    #[getter]
    fn uncertainty_charges(&self) -> Vec<Vec<f64>> {
        self.run.settlement.uncertainty.clone()
    }

    #[getter]
    fn residue(&self) -> Vec<f64> {
        self.run.settlement.residue.clone()
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &report::summary_json(&self.run))
    }

    fn prices_csv(&self) -> String {
        report::prices_csv(&self.case, &self.run.prices)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.run).map_err(err)
    }

    /// Redispatches sampled deviations against the cleared schedule.
    #[pyo3(signature = (samples=200, seed=0))]
    fn monte_carlo<'py>(&self, py: Python<'py>, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let mc = market::monte_carlo(&self.case, &self.run, samples, seed).map_err(err)?;
        to_py(py, &mc)
    }

    /// Audits a balanced nodal FTR portfolio; `hour` is 0-based, `None` covers the day.
    /// Rows in the result are labelled with 1-based hours, as in the CLI.
    #[pyo3(signature = (amounts, hour=None))]
    fn ftr<'py>(&self, py: Python<'py>, amounts: Vec<f64>, hour: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let case = &self.case;
        if amounts.len() != case.buses {
            return Err(PyValueError::new_err(format!(
                "portfolio has {} amounts, case has {} buses",
                amounts.len(),
                case.buses
            )));
        }
        let pf = FtrPortfolio::new(amounts).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let sf = market::shift_factors(case).map_err(err)?;
        let flows = ftr_sft(&pf, &sf, &line_capacities(case)).map_err(err)?;
        let hours: Vec<usize> = match hour {
            Some(t) if t < case.horizon => vec![t],
            Some(t) => return Err(PyValueError::new_err(format!("hour {t} outside 0..{}", case.horizon))),
            None => (0..case.horizon).collect(),
        };
        let rows = hours
            .into_iter()
            .map(|t| {
                let f = ftr_settle(&pf, &self.run.prices, &self.run.schedule, &sf, t).map_err(err)?;
                Ok((t, f, self.run.settlement.residue[t]))
            })
            .collect::<PyResult<Vec<_>>>()?;
        to_py(py, &report::ftr_json(case, &flows, &rows))
    }

    fn __repr__(&self) -> String {
        let (lam, ld) = self.run.config.budgets();
        format!(
            "MarketRun(cost={:.2}, lambda={lam}, lambda_delta={ld}, iterations={})",
            self.run.cost,
            self.run.log.iterations()
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    lam: f64,
    lambda_delta: f64,
    mode: &str,
    lines: bool,
    storage: bool,
    max_iters: usize,
    ccg_tol: f64,
) -> PyResult<RunConfig> {
    let mode: Mode = mode.parse().map_err(PyValueError::new_err)?;
    let cfg = RunConfig {
        bus_budget: lam,
        system_budget: lambda_delta,
        mode,
        lines,
        storage,
        limits: CcgLimits {
            max_iterations: max_iters,
            tol: ccg_tol,
        },
        ..RunConfig::default()
    };
    cfg.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(cfg)
}

/// Clears the market. `lam` is the bus-level budget, `lambda_delta` the system budget.
#[pyfunction]
#[pyo3(signature = (case, lam=1.0, lambda_delta=2.0, mode="robust", lines=true, storage=false, max_iters=20, ccg_tol=1e-6))]
#[allow(clippy::too_many_arguments)]
fn clear(
    py: Python<'_>,
    case: &PyCase,
    lam: f64,
    lambda_delta: f64,
    mode: &str,
    lines: bool,
    storage: bool,
    max_iters: usize,
    ccg_tol: f64,
) -> PyResult<PyMarketRun> {
    let cfg = config(lam, lambda_delta, mode, lines, storage, max_iters, ccg_tol)?;
    let case = case.inner.clone();
    let solver = solver()?;
    let run = py.detach(|| market::clear(&case, &cfg, solver.as_ref())).map_err(err)?;
    Ok(PyMarketRun { case, run })
}

/// Clears every (lambda, lambda_delta) pair and reports costs and a monotonicity flag.
#[pyfunction]
#[pyo3(signature = (case, lambdas, lambda_deltas, mode="robust"))]
fn sweep<'py>(
    py: Python<'py>,
    case: &PyCase,
    lambdas: Vec<f64>,
    lambda_deltas: Vec<f64>,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let base = config(1.0, 2.0, mode, true, false, 20, 1e-6)?;
    let solver = solver()?;
    let sw = py
        .detach(|| market::sweep(&case.inner, &base, &lambdas, &lambda_deltas, solver.as_ref()))
        .map_err(err)?;
    to_py(py, &sw)
}

#[pymodule]
fn pyumpclear(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ClearingError", m.py().get_type::<ClearingError>())?;
    m.add_class::<PyCase>()?;
    m.add_class::<PyMarketRun>()?;
    m.add_function(wrap_pyfunction!(clear, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
