//! Python bindings: scenarios, contact settings, rollouts, the objective and
//! its adjoint gradient, and the optimizer.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use toi_sim::experiment::{self, ExperimentError};
use toi_sim::objective::{self as obj, ObjectiveConfig};
use toi_sim::optimize::{self as opt, Method, OptimizerConfig};
use toi_sim::sim::{self, ContactEvent, ContactModel, State, ToiRule};
use toi_sim::{SimError, Vec2};

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn exp_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::Sim(inner) => sim_err(inner),
        other if other.exit_code() == 2 => PyValueError::new_err(other.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn pair(v: Vec2) -> (f64, f64) {
    (v.x, v.y)
}

fn to_controls(scenario: &sim::Scenario, controls: Option<Vec<[f64; 2]>>) -> Vec<Vec2> {
    controls.map_or_else(
        || scenario.initial_controls(),
        |c| c.into_iter().map(Vec2::from).collect(),
    )
}

#[pyclass(name = "Scenario", module = "toi_sim", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: sim::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Built-in scenario by name (`single` or `multi`), or a TOML / run.json path.
    #[staticmethod]
    fn load(name_or_path: &str) -> PyResult<Self> {
        let inner = experiment::load_scenario(name_or_path).map_err(exp_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn single() -> Self {
        Self {
            inner: sim::Scenario::single(),
        }
    }

    #[staticmethod]
    fn multi() -> Self {
        Self {
            inner: sim::Scenario::multi(),
        }
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn wall_level(&self) -> Option<f64> {
        self.inner.wall.map(|w| w.level)
    }

    #[getter]
    fn target(&self) -> (f64, f64) {
        pair(self.inner.target)
    }

    #[getter]
    fn initial_control(&self) -> (f64, f64) {
        pair(self.inner.initial_control)
    }

    fn initial_controls(&self) -> Vec<(f64, f64)> {
        self.inner.initial_controls().into_iter().map(pair).collect()
    }

    /// Optimal loss of the continuous problem, when known.
    fn analytical_loss(&self) -> Option<f64> {
        experiment::analytical_loss(&self.inner.name)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, steps={}, horizon={}, radius={})",
            self.inner.name, self.inner.steps, self.inner.horizon, self.inner.radius
        )
    }
}

#[pyclass(name = "ContactConfig", module = "toi_sim", from_py_object)]
#[derive(Clone)]
struct PyContactConfig {
    inner: sim::ContactConfig,
}

#[pymethods]
impl PyContactConfig {
    #[new]
    #[pyo3(signature = (model = "direct", toi_position = None, toi_velocity = None, toi_rule = "swept", stiffness = None, damping = 0.0))]
    fn new(
        model: &str,
        toi_position: Option<bool>,
        toi_velocity: Option<bool>,
        toi_rule: &str,
        stiffness: Option<f64>,
        damping: f64,
    ) -> PyResult<Self> {
        let model: ContactModel = model.parse().map_err(sim_err)?;
        // corrections default on for the direct model, off otherwise
        let direct = model == ContactModel::Direct;
        let mut inner = sim::ContactConfig::direct(toi_position.unwrap_or(direct), toi_velocity.unwrap_or(direct));
        inner.model = model;
        inner.toi_rule = match toi_rule {
            "swept" => ToiRule::Swept,
            "linear" => ToiRule::Linear,
            other => return Err(PyValueError::new_err(format!("unknown toi rule `{other}`"))),
        };
        if let Some(k) = stiffness {
            inner.stiffness = k;
        }
        inner.damping = damping;
        inner.validate().map_err(sim_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn model(&self) -> String {
        self.inner.model.to_string()
    }

    #[getter]
    fn toi_position(&self) -> bool {
        self.inner.toi_position
    }

    #[getter]
    fn toi_velocity(&self) -> bool {
        self.inner.toi_velocity
    }

    #[getter]
    fn stiffness(&self) -> f64 {
        self.inner.stiffness
    }

    fn __repr__(&self) -> String {
        format!(
            "ContactConfig(model={:?}, toi_position={}, toi_velocity={})",
            self.inner.model.to_string(),
            self.inner.toi_position,
            self.inner.toi_velocity
        )
    }
}

fn state_row(s: &State) -> [f64; 8] {
    [s.p1.x, s.p1.y, s.v1.x, s.v1.y, s.p2.x, s.p2.y, s.v2.x, s.v2.y]
}

fn event_dict<'py>(py: Python<'py>, e: &ContactEvent, dt: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", e.step)?;
    d.set_item("time", e.time(dt))?;
    d.set_item("pair", e.pair.label())?;
    d.set_item("depth", e.depth)?;
    d.set_item("toi", e.toi)?;
    d.set_item("toi_clamped", e.toi_clamped)?;
    d.set_item("normal", pair(e.normal))?;
    d.set_item("velocities_before", e.velocities_before.map(pair))?;
    d.set_item("velocities_after", e.velocities_after.map(pair))?;
    d.set_item("rewound_gap", e.rewound_gap)?;
    Ok(d)
}

/// Simulates `controls` (default: the scenario's constant initial control).
///
/// Returns a dict with `states` (rows of p1x, p1y, v1x, v1y, p2x, p2y, v2x,
/// v2y) and `events`.
#[pyfunction]
#[pyo3(signature = (scenario, contact, controls = None))]
fn rollout<'py>(
    py: Python<'py>,
    scenario: PyRef<'py, PyScenario>,
    contact: PyRef<'py, PyContactConfig>,
    controls: Option<Vec<[f64; 2]>>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = &scenario.inner;
    let traj = sim::rollout(s, &contact.inner, &to_controls(s, controls)).map_err(sim_err)?;
    let out = PyDict::new(py);
    out.set_item("states", traj.states.iter().map(state_row).collect::<Vec<_>>())?;
    let events = traj
        .events
        .iter()
        .map(|e| event_dict(py, e, s.dt()))
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("events", events)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (scenario, contact, controls = None))]
fn objective(
    scenario: PyRef<'_, PyScenario>,
    contact: PyRef<'_, PyContactConfig>,
    controls: Option<Vec<[f64; 2]>>,
) -> PyResult<f64> {
    let s = &scenario.inner;
    obj::objective(s, &contact.inner, &to_controls(s, controls)).map_err(sim_err)
}

/// `(loss, gradient)` with one `(dx, dy)` pair per control entry.
#[pyfunction]
#[pyo3(signature = (scenario, contact, controls = None))]
fn objective_gradient(
    scenario: PyRef<'_, PyScenario>,
    contact: PyRef<'_, PyContactConfig>,
    controls: Option<Vec<[f64; 2]>>,
) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let s = &scenario.inner;
    let eval = obj::objective_gradient(
        s,
        &contact.inner,
        &ObjectiveConfig::from_scenario(s),
        &to_controls(s, controls),
    )
    .map_err(sim_err)?;
    Ok((eval.loss, eval.gradient.into_iter().map(pair).collect()))
}

/// Descends from `controls` (default: the initial control) and returns a dict
/// with `best_loss`, `controls` (the best iterate) and per-iteration `losses`.
#[pyfunction]
#[pyo3(signature = (scenario, contact, controls = None, learning_rate = opt::DEFAULT_LEARNING_RATE, iterations = opt::DEFAULT_ITERATIONS, momentum = 0.0))]
fn optimize<'py>(
    py: Python<'py>,
    scenario: PyRef<'py, PyScenario>,
    contact: PyRef<'py, PyContactConfig>,
    controls: Option<Vec<[f64; 2]>>,
    learning_rate: f64,
    iterations: usize,
    momentum: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = scenario.inner.clone();
    let c = contact.inner;
    let init = to_controls(&s, controls);
    let config = OptimizerConfig {
        method: if momentum > 0.0 {
            Method::Momentum
        } else {
            Method::GradientDescent
        },
        learning_rate,
        momentum,
        iterations,
        ..OptimizerConfig::default()
    };
    let result = py
        .detach(|| opt::optimize(&s, &c, &ObjectiveConfig::from_scenario(&s), &config, &init))
        .map_err(sim_err)?;
    let out = PyDict::new(py);
    out.set_item("best_loss", result.best_loss)?;
    out.set_item("controls", result.controls.into_iter().map(pair).collect::<Vec<_>>())?;
    out.set_item(
        "losses",
        result.curve.records.iter().map(|r| r.loss).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "toi_sim")]
fn toi_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyContactConfig>()?;
    m.add_function(wrap_pyfunction!(rollout, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(objective_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    Ok(())
}
