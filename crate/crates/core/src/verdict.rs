//! Agent-versus-device verdicts.
//!
//! The system mixture weights the device and agent mixtures ½/½, so
//! `P(agent | h) = 1 / (1 + exp(nll_agt - nll_dev))`. All quantities are
//! carried as negative log likelihoods in nats.

use std::borrow::Borrow;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, GoalSummary, GreedyProfile, GreedyStep};
use crate::device::{self, context_of, ContextStats, DevicePredictor};
use crate::gridworld::{
    format_actions, replay, Action, CellKind, Color, GridMap, Pos, Trajectory, INITIAL_LAST_ACTION,
};
use crate::logspace::{log_sum_exp, softplus};
use crate::planner::{PlanError, PlanSet, DEFAULT_GAMMA};
use crate::switching::{self, epsilon_grid, SwitchState, DEFAULT_EPSILON_POINTS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerdictError {
    #[error("both mixtures assign zero probability; the posterior is undefined")]
    UndefinedPosterior,
    #[error("negative log likelihood is NaN")]
    NotANumber,
    #[error("epsilon grid needs at least 2 points, got {0}")]
    BadGrid(usize),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// A map together with the solved plans for each of its balloons.
#[derive(Debug, Clone)]
pub struct World {
    map: GridMap,
    plans: PlanSet,
}

impl World {
    pub fn new(map: GridMap, gamma: f64) -> Result<World, VerdictError> {
        let plans = PlanSet::solve(&map, gamma)?;
        Ok(World { map, plans })
    }

    pub fn default_world() -> World {
        World::new(GridMap::default_map(), DEFAULT_GAMMA).expect("shipped map has balloons")
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn plans(&self) -> &PlanSet {
        &self.plans
    }

    pub fn gamma(&self) -> f64 {
        self.plans.gamma()
    }

    pub fn colors(&self) -> Vec<Color> {
        self.plans.colors()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssessConfig {
    pub switching: bool,
    pub epsilon_points: usize,
}

impl Default for AssessConfig {
    fn default() -> Self {
        AssessConfig {
            switching: false,
            epsilon_points: DEFAULT_EPSILON_POINTS,
        }
    }
}

impl AssessConfig {
    pub fn switching(switching: bool) -> Self {
        AssessConfig {
            switching,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), VerdictError> {
        if self.epsilon_points < 2 {
            Err(VerdictError::BadGrid(self.epsilon_points))
        } else {
            Ok(())
        }
    }
}

/// Posterior of the two explanations, with their negative logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StancePosterior {
    pub dev: f64,
    pub agt: f64,
    pub neg_log_dev: f64,
    pub neg_log_agt: f64,
}

/// Combines the two negative log likelihoods under a ½/½ prior.
pub fn combine(nll_dev: f64, nll_agt: f64) -> Result<StancePosterior, VerdictError> {
    if nll_dev.is_nan() || nll_agt.is_nan() {
        return Err(VerdictError::NotANumber);
    }
    if nll_dev == f64::INFINITY && nll_agt == f64::INFINITY {
        return Err(VerdictError::UndefinedPosterior);
    }
    let gap = nll_agt - nll_dev;
    let neg_log_agt = softplus(gap);
    let neg_log_dev = softplus(-gap);
    Ok(StancePosterior {
        dev: (-neg_log_dev).exp(),
        agt: (-neg_log_agt).exp(),
        neg_log_dev,
        neg_log_agt,
    })
}

/// `-ln(½ exp(-nll_dev) + ½ exp(-nll_agt))`.
pub fn system_nll(nll_dev: f64, nll_agt: f64) -> f64 {
    -log_sum_exp(&[-nll_dev, -nll_agt]) + 2f64.ln()
}

/// Joint posterior of each goal in the system mixture (non-switching agent
/// model). Together with the device posterior these sum to 1.
pub fn goal_posterior(world: &World, traj: &Trajectory) -> Result<Vec<(Color, f64)>, VerdictError> {
    let profiles = agent::profiles_for(world.map(), traj, world.plans());
    let nll_dev = device::batch_nll(traj);
    let weight = -(profiles.len() as f64).ln();
    let logs: Vec<f64> = profiles
        .iter()
        .map(|p| weight + agent::log_policy_integrated(p))
        .collect();
    let nll_agt = -log_sum_exp(&logs);
    let nll_sys = system_nll(nll_dev, nll_agt);
    if nll_sys == f64::INFINITY {
        return Err(VerdictError::UndefinedPosterior);
    }
    Ok(world
        .colors()
        .into_iter()
        .zip(logs)
        .map(|(c, l)| (c, (0.5f64.ln() + l + nll_sys).exp()))
        .collect())
}

/// Everything observable after some number of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReadout {
    pub t: usize,
    pub position: Pos,
    pub last_action: Option<Action>,
    pub observation: CellKind,
    pub nll_dev: f64,
    pub nll_agt: f64,
    pub posterior_agt: f64,
    pub posterior_dev: f64,
    /// Goal probabilities within the agent mixture, in the world's colour order.
    pub goal_posteriors: Vec<f64>,
}

/// Step-by-step scorer. Keeps every accumulator needed to produce a
/// [`StepReadout`] after each action without rescanning the history.
#[derive(Debug, Clone)]
pub struct Tracker<W: Borrow<World>> {
    world: W,
    config: AssessConfig,
    position: Pos,
    last_action: Action,
    observation: CellKind,
    actions: Vec<Action>,
    device: DevicePredictor,
    profiles: Vec<GreedyProfile>,
    switch: SwitchState,
}

impl<W: Borrow<World>> Tracker<W> {
    pub fn new(world: W, config: AssessConfig) -> Result<Self, VerdictError> {
        config.validate()?;
        let (position, observation, goals) = {
            let w = world.borrow();
            let start = w.map().start();
            (start, w.map().observe(start, INITIAL_LAST_ACTION), w.plans().len())
        };
        Ok(Tracker {
            world,
            config,
            position,
            last_action: INITIAL_LAST_ACTION,
            observation,
            actions: Vec::new(),
            device: DevicePredictor::new(),
            profiles: vec![GreedyProfile::new(); goals],
            switch: SwitchState::new(goals, config.epsilon_points),
        })
    }

    pub fn world(&self) -> &World {
        self.world.borrow()
    }

    pub fn config(&self) -> AssessConfig {
        self.config
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn position(&self) -> Pos {
        self.position
    }

    pub fn device_stats(&self) -> &ContextStats {
        self.device.stats()
    }

    pub fn profiles(&self) -> &[GreedyProfile] {
        &self.profiles
    }

    pub fn switch_state(&self) -> &SwitchState {
        &self.switch
    }

    pub fn push(&mut self, action: Action) -> StepReadout {
        let world: &World = self.world.borrow();
        let map = world.map();

        self.device
            .push(context_of(self.observation, self.last_action), action);

        let steps: Vec<GreedyStep> = world
            .plans()
            .plans()
            .iter()
            .map(|plan| {
                let set = plan.optimal_actions(map, self.position);
                GreedyStep::new(set.len() as u8, set.contains(action))
            })
            .collect();
        for (profile, &step) in self.profiles.iter_mut().zip(&steps) {
            profile.push(step);
        }
        self.switch.step(&steps);

        self.position = map.step(self.position, action);
        self.observation = map.observe(self.position, action);
        self.last_action = action;
        self.actions.push(action);
        self.readout()
    }

    pub fn nll_dev(&self) -> f64 {
        self.device.nll()
    }

    pub fn nll_agt_non_switching(&self) -> f64 {
        -agent::log_mixture_of_profiles(&self.profiles).expect("worlds always have goals")
    }

    pub fn nll_agt_switching(&self) -> f64 {
        -self.switch.log_likelihood()
    }

    pub fn nll_agt(&self) -> f64 {
        if self.config.switching {
            self.nll_agt_switching()
        } else {
            self.nll_agt_non_switching()
        }
    }

    /// Goal probabilities conditional on the agent explanation.
    pub fn goal_posteriors(&self) -> Vec<f64> {
        if self.config.switching {
            self.switch.goal_posterior()
        } else {
            agent::goal_weights(&self.profiles)
        }
    }

    pub fn readout(&self) -> StepReadout {
        let nll_dev = self.nll_dev();
        let nll_agt = self.nll_agt();
        let post = combine(nll_dev, nll_agt).expect("device likelihood is always positive");
        StepReadout {
            t: self.actions.len(),
            position: self.position,
            last_action: self.actions.last().copied(),
            observation: self.observation,
            nll_dev,
            nll_agt,
            posterior_agt: post.agt,
            posterior_dev: post.dev,
            goal_posteriors: self.goal_posteriors(),
        }
    }
}

/// One row of the context-hit table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextHits {
    pub context: String,
    pub up: u32,
    pub down: u32,
    pub left: u32,
    pub right: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalProbability {
    pub color: Color,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub steps: usize,
    pub actions: String,
    pub switching: bool,
    pub gamma: f64,
    pub epsilon_points: usize,
    /// v1 for the device mixture.
    pub nll_dev: f64,
    /// v1 for the agent mixture (switching or not, per `switching`).
    pub nll_agt: f64,
    pub nll_agt_non_switching: f64,
    pub nll_agt_switching: f64,
    pub nll_sys: f64,
    /// v2.
    pub posterior_dev: f64,
    pub posterior_agt: f64,
    /// v3.
    pub neg_log_posterior_dev: f64,
    pub neg_log_posterior_agt: f64,
    /// Most probable exploration rate on the agent grid.
    pub map_epsilon: f64,
    pub goal_colors: Vec<Color>,
    pub goals: Vec<GoalSummary>,
    /// Joint posterior of each goal inside the system mixture.
    pub goal_posteriors: Vec<GoalProbability>,
    /// `P(agent)` after `t = 0..=T` steps.
    pub posterior_trace: Vec<f64>,
    /// Goal probabilities within the agent mixture after `t = 0..=T` steps.
    pub goal_trace: Vec<Vec<f64>>,
    /// Context-hit table in context order.
    pub context_hits: Vec<ContextHits>,
}

impl VerdictReport {
    /// Plain-text table of v1..v3 for both mixtures.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24}{:>14}{:>14}", "", "M_dev", "M_agt");
        let _ = writeln!(
            out,
            "{:<24}{:>14.4}{:>14.4}",
            "v1 = -ln P(h | M)", self.nll_dev, self.nll_agt
        );
        let _ = writeln!(
            out,
            "{:<24}{:>14.6}{:>14.6}",
            "v2 = P(M | h)", self.posterior_dev, self.posterior_agt
        );
        let _ = writeln!(
            out,
            "{:<24}{:>14.4}{:>14.4}",
            "v3 = -ln P(M | h)", self.neg_log_posterior_dev, self.neg_log_posterior_agt
        );
        out
    }

    pub fn goal_probability(&self, color: Color) -> Option<f64> {
        self.goal_posteriors
            .iter()
            .find(|g| g.color == color)
            .map(|g| g.probability)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Runs the incremental scorer over the whole trajectory and returns the
/// final tracker together with the per-step traces.
fn traces<W: Borrow<World>>(world: W, traj: &Trajectory, config: AssessConfig) -> Result<(Vec<f64>, Vec<Vec<f64>>), VerdictError> {
    let mut tracker = Tracker::new(world, config)?;
    let first = tracker.readout();
    let mut posterior = vec![first.posterior_agt];
    let mut goals = vec![first.goal_posteriors];
    for &a in &traj.actions {
        let r = tracker.push(a);
        posterior.push(r.posterior_agt);
        goals.push(r.goal_posteriors);
    }
    Ok((posterior, goals))
}

/// Full report for a trajectory replayed on `world`'s map.
///
/// Final values come from the batch formulas; the traces come from the
/// step-by-step scorer, so the last trace entry doubles as a cross-check.
pub fn assess(world: &World, traj: &Trajectory, config: AssessConfig) -> Result<VerdictReport, VerdictError> {
    config.validate()?;
    let map = world.map();
    let plans = world.plans();

    let stats = ContextStats::from_trajectory(traj);
    let nll_dev = -stats.batch_log_likelihood();
    let profiles = agent::profiles_for(map, traj, plans);
    let nll_agt_non_switching =
        -agent::log_mixture_of_profiles(&profiles).expect("worlds always have goals");
    let nll_agt_switching = -switching::switching_log_likelihood(map, traj, plans, config.epsilon_points);
    let nll_agt = if config.switching {
        nll_agt_switching
    } else {
        nll_agt_non_switching
    };
    let post = combine(nll_dev, nll_agt)?;

    let (posterior_trace, goal_trace) = traces(world, traj, config)?;

    let conditional: Vec<f64> = if config.switching {
        goal_trace.last().cloned().unwrap_or_default()
    } else {
        agent::goal_weights(&profiles)
    };
    let colors = world.colors();
    let goal_posteriors = colors
        .iter()
        .zip(&conditional)
        .map(|(&color, &p)| GoalProbability {
            color,
            probability: post.agt * p,
        })
        .collect();

    let map_epsilon = if traj.is_empty() {
        0.0
    } else if config.switching {
        let mut state = SwitchState::new(plans.len(), config.epsilon_points);
        for steps in switching::step_table(map, traj, plans) {
            state.step(&steps);
        }
        state.map_epsilon()
    } else {
        agent::grid_map_epsilon(&profiles, &epsilon_grid(config.epsilon_points))
    };

    let context_hits = stats
        .hit_rows()
        .into_iter()
        .map(|(context, [up, down, left, right])| ContextHits {
            context,
            up,
            down,
            left,
            right,
        })
        .collect();

    Ok(VerdictReport {
        steps: traj.len(),
        actions: format_actions(&traj.actions),
        switching: config.switching,
        gamma: world.gamma(),
        epsilon_points: config.epsilon_points,
        nll_dev,
        nll_agt,
        nll_agt_non_switching,
        nll_agt_switching,
        nll_sys: system_nll(nll_dev, nll_agt),
        posterior_dev: post.dev,
        posterior_agt: post.agt,
        neg_log_posterior_dev: post.neg_log_dev,
        neg_log_posterior_agt: post.neg_log_agt,
        map_epsilon,
        goal_colors: colors.clone(),
        goals: colors
            .iter()
            .zip(&profiles)
            .map(|(&c, p)| GoalSummary::from_profile(c, p))
            .collect(),
        goal_posteriors,
        posterior_trace,
        goal_trace,
        context_hits,
    })
}

/// Convenience wrapper: replays `actions` from the start cell and assesses.
pub fn assess_actions(world: &World, actions: &[Action], config: AssessConfig) -> Result<VerdictReport, VerdictError> {
    assess(world, &replay(world.map(), actions), config)
}

/// Spreads per-goal values over the four colours; absent balloons get 0.
pub fn by_color(colors: &[Color], values: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (c, v) in colors.iter().zip(values) {
        out[c.index()] = *v;
    }
    out
}
