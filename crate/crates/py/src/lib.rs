//! Python bindings.
//!
//! ```python
//! import agency
//! world = agency.World()
//! report = agency.assess(world, agency.scenario_actions("magenta"))
//! print(report.posterior_agt)
//! ```

use std::sync::Arc;

use agency_core::export;
use agency_core::gridworld::GridMap;
use agency_core::scenario::{scenario_actions as generate, Scenario, ScenarioParams};
use agency_core::verdict::{StepReadout, Tracker as CoreTracker, VerdictReport};
use agency_core::{format_actions, parse_actions, Action, AssessConfig, Color, World as CoreWorld, DEFAULT_EPSILON_POINTS, DEFAULT_GAMMA};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn actions_from(s: &str) -> PyResult<Vec<Action>> {
    parse_actions(s).map_err(value_err)
}

/// A map with its solved goal plans.
#[pyclass(frozen)]
struct World {
    inner: Arc<CoreWorld>,
}

#[pymethods]
impl World {
    /// `map` is map text; the shipped map when omitted.
    #[new]
    #[pyo3(signature = (map=None, gamma=DEFAULT_GAMMA))]
    fn new(map: Option<&str>, gamma: f64) -> PyResult<Self> {
        let map = match map {
            Some(text) => GridMap::parse(text).map_err(value_err)?,
            None => GridMap::default_map(),
        };
        Ok(World {
            inner: Arc::new(CoreWorld::new(map, gamma).map_err(value_err)?),
        })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.map().rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.map().cols()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn start(&self) -> (usize, usize) {
        let p = self.inner.map().start();
        (p.row, p.col)
    }

    /// `{color: (row, col)}` for every balloon on the map.
    #[getter]
    fn goals<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for &(color, p) in self.inner.map().goals() {
            d.set_item(color.name(), (p.row, p.col))?;
        }
        Ok(d)
    }

    /// The position reached by replaying `actions` from the start.
    fn replay(&self, actions: &str) -> PyResult<Vec<(usize, usize)>> {
        let traj = agency_core::replay(self.inner.map(), &actions_from(actions)?);
        Ok(traj.positions.iter().map(|p| (p.row, p.col)).collect())
    }

    /// Optimal actions at a cell as a string over U, D, L, R.
    fn optimal_actions(&self, color: &str, row: usize, col: usize) -> PyResult<String> {
        let color: Color = color.parse().map_err(value_err)?;
        let plan = self
            .inner
            .plans()
            .get(color)
            .ok_or_else(|| PyValueError::new_err(format!("no {color} balloon on this map")))?;
        let pos = agency_core::Pos::new(row, col);
        let map = self.inner.map();
        if !map.in_bounds(pos) || map.is_wall(pos) {
            return Err(PyIndexError::new_err(format!("{pos} is not an open cell")));
        }
        Ok(plan.optimal_actions(map, pos).iter().map(Action::letter).collect())
    }

    fn to_text(&self) -> String {
        self.inner.map().to_text()
    }

    fn value_table_csv(&self) -> String {
        export::value_table_csv(&self.inner)
    }
}

/// Scores for one trajectory.
#[pyclass(frozen)]
struct Report {
    inner: VerdictReport,
}

#[pymethods]
impl Report {
    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn actions(&self) -> &str {
        &self.inner.actions
    }

    #[getter]
    fn switching(&self) -> bool {
        self.inner.switching
    }

    #[getter]
    fn nll_dev(&self) -> f64 {
        self.inner.nll_dev
    }

    #[getter]
    fn nll_agt(&self) -> f64 {
        self.inner.nll_agt
    }

    #[getter]
    fn nll_agt_non_switching(&self) -> f64 {
        self.inner.nll_agt_non_switching
    }

    #[getter]
    fn nll_agt_switching(&self) -> f64 {
        self.inner.nll_agt_switching
    }

    #[getter]
    fn nll_sys(&self) -> f64 {
        self.inner.nll_sys
    }

    #[getter]
    fn posterior_dev(&self) -> f64 {
        self.inner.posterior_dev
    }

    #[getter]
    fn posterior_agt(&self) -> f64 {
        self.inner.posterior_agt
    }

    #[getter]
    fn map_epsilon(&self) -> f64 {
        self.inner.map_epsilon
    }

    #[getter]
    fn posterior_trace(&self) -> Vec<f64> {
        self.inner.posterior_trace.clone()
    }

    /// Goal posterior after each step, one list per step in `goal_colors` order.
    #[getter]
    fn goal_trace(&self) -> Vec<Vec<f64>> {
        self.inner.goal_trace.clone()
    }

    #[getter]
    fn goal_colors(&self) -> Vec<&'static str> {
        self.inner.goal_colors.iter().map(|c| c.name()).collect()
    }

    /// Joint posterior of agent-with-goal, keyed by colour.
    #[getter]
    fn goal_posteriors<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for g in &self.inner.goal_posteriors {
            d.set_item(g.color.name(), g.probability)?;
        }
        Ok(d)
    }

    fn table(&self) -> String {
        self.inner.table()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn context_hits_csv(&self) -> String {
        export::context_hits_csv(&self.inner)
    }

    fn goal_trace_csv(&self) -> String {
        export::goal_trace_csv(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(steps={}, posterior_agt={:.6}, nll_dev={:.4}, nll_agt={:.4})",
            self.inner.steps, self.inner.posterior_agt, self.inner.nll_dev, self.inner.nll_agt
        )
    }
}

fn config(switching: bool, epsilon_points: usize) -> AssessConfig {
    AssessConfig {
        switching,
        epsilon_points,
    }
}

/// Scores an action string on `world`.
#[pyfunction]
#[pyo3(signature = (world, actions, switching=false, epsilon_points=DEFAULT_EPSILON_POINTS))]
fn assess(py: Python<'_>, world: &World, actions: &str, switching: bool, epsilon_points: usize) -> PyResult<Report> {
    let actions = actions_from(actions)?;
    let inner = Arc::clone(&world.inner);
    let report = py
        .detach(move || agency_core::assess_actions(&inner, &actions, config(switching, epsilon_points)))
        .map_err(value_err)?;
    Ok(Report { inner: report })
}

/// Action string for a named scenario on `world` (the shipped map by default).
#[pyfunction]
#[pyo3(signature = (name, seed=None, steps=None, world=None))]
fn scenario_actions(name: &str, seed: Option<u64>, steps: Option<usize>, world: Option<&World>) -> PyResult<String> {
    let scenario: Scenario = name.parse().map_err(value_err)?;
    let params = ScenarioParams { seed, steps };
    let actions = match world {
        Some(w) => generate(w.inner.map(), scenario, params),
        None => generate(&GridMap::default_map(), scenario, params),
    }
    .map_err(value_err)?;
    Ok(format_actions(&actions))
}

fn readout_dict<'py>(py: Python<'py>, r: &StepReadout, colors: &[Color]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("position", (r.position.row, r.position.col))?;
    d.set_item("last_action", r.last_action.map(|a| a.letter().to_string()))?;
    d.set_item("observation", r.observation.name())?;
    d.set_item("nll_dev", r.nll_dev)?;
    d.set_item("nll_agt", r.nll_agt)?;
    d.set_item("posterior_agt", r.posterior_agt)?;
    d.set_item("posterior_dev", r.posterior_dev)?;
    let goals = PyDict::new(py);
    for (c, p) in colors.iter().zip(&r.goal_posteriors) {
        goals.set_item(c.name(), p)?;
    }
    d.set_item("goal_posteriors", goals)?;
    Ok(d)
}

/// Step-by-step scorer, the same one the HTTP sessions use.
#[pyclass]
struct Tracker {
    world: Arc<CoreWorld>,
    inner: CoreTracker<Arc<CoreWorld>>,
}

#[pymethods]
impl Tracker {
    #[new]
    #[pyo3(signature = (world, switching=false, epsilon_points=DEFAULT_EPSILON_POINTS))]
    fn new(world: &World, switching: bool, epsilon_points: usize) -> PyResult<Self> {
        let inner = CoreTracker::new(Arc::clone(&world.inner), config(switching, epsilon_points)).map_err(value_err)?;
        Ok(Tracker {
            world: Arc::clone(&world.inner),
            inner,
        })
    }

    /// Applies one action (`U`, `D`, `L` or `R`) and returns the readout.
    fn step<'py>(&mut self, py: Python<'py>, action: &str) -> PyResult<Bound<'py, PyDict>> {
        let mut parsed = actions_from(action)?;
        if parsed.len() != 1 {
            return Err(PyValueError::new_err(format!("expected one action, got {action:?}")));
        }
        let r = self.inner.push(parsed.remove(0));
        readout_dict(py, &r, &self.world.colors())
    }

    fn readout<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        readout_dict(py, &self.inner.readout(), &self.world.colors())
    }

    /// Drops the last action. Raises `IndexError` when there is none.
    fn undo(&mut self) -> PyResult<()> {
        let Some((_, prefix)) = self.inner.actions().split_last() else {
            return Err(PyIndexError::new_err("nothing to undo"));
        };
        let prefix = prefix.to_vec();
        self.rebuild(&prefix)
    }

    fn reset(&mut self) -> PyResult<()> {
        self.rebuild(&[])
    }

    #[getter]
    fn t(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn actions(&self) -> String {
        format_actions(self.inner.actions())
    }

    fn report(&self) -> PyResult<Report> {
        let report = agency_core::assess_actions(&self.world, self.inner.actions(), self.inner.config()).map_err(value_err)?;
        Ok(Report { inner: report })
    }
}

impl Tracker {
    fn rebuild(&mut self, actions: &[Action]) -> PyResult<()> {
        let mut t = CoreTracker::new(Arc::clone(&self.world), self.inner.config()).map_err(value_err)?;
        for &a in actions {
            t.push(a);
        }
        self.inner = t;
        Ok(())
    }
}

#[pymodule]
fn agency(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<World>()?;
    m.add_class::<Report>()?;
    m.add_class::<Tracker>()?;
    m.add_function(wrap_pyfunction!(assess, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_actions, m)?)?;
    m.add("DEFAULT_GAMMA", DEFAULT_GAMMA)?;
    m.add("DEFAULT_EPSILON_POINTS", DEFAULT_EPSILON_POINTS)?;
    m.add("SCENARIOS", Scenario::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    Ok(())
}
