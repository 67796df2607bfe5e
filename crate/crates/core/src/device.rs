//! Device hypothesis: a reactive system whose action depends only on the
//! current context `(faced cell, last action)`.
//!
//! Each of the 24 contexts carries an independent categorical distribution
//! over the 4 actions with a uniform Dirichlet prior. Integrating the prior
//! out gives the Laplace rule `(T_{c,a} + 1) / (T_c + A)` as the sequential
//! predictive, and the batch marginal
//! `prod_c (A-1)! prod_i T_{c,i}! / (T_c + A - 1)!`.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::gridworld::{Action, CellKind, Trajectory, NUM_ACTIONS, NUM_CELL_KINDS};

pub const NUM_CONTEXTS: usize = NUM_CELL_KINDS * NUM_ACTIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextId(u8);

impl ContextId {
    pub fn new(observation: CellKind, last_action: Action) -> ContextId {
        ContextId((observation.index() * NUM_ACTIONS + last_action.index()) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Option<ContextId> {
        (i < NUM_CONTEXTS).then_some(ContextId(i as u8))
    }

    pub fn observation(self) -> CellKind {
        CellKind::ALL[self.index() / NUM_ACTIONS]
    }

    pub fn last_action(self) -> Action {
        Action::ALL[self.index() % NUM_ACTIONS]
    }

    /// `in_front,last_action` label, e.g. `wall,up`.
    pub fn label(self) -> String {
        format!("{},{}", self.observation(), self.last_action())
    }

    pub fn all() -> impl Iterator<Item = ContextId> {
        (0..NUM_CONTEXTS).map(|i| ContextId(i as u8))
    }
}

pub fn context_of(observation: CellKind, last_action: Action) -> ContextId {
    ContextId::new(observation, last_action)
}

/// Per-context action visit counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStats {
    counts: [[u32; NUM_ACTIONS]; NUM_CONTEXTS],
}

impl Default for ContextStats {
    fn default() -> Self {
        ContextStats {
            counts: [[0; NUM_ACTIONS]; NUM_CONTEXTS],
        }
    }
}

impl ContextStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let mut stats = ContextStats::new();
        for ((obs, last), a) in traj.contexts().zip(traj.actions.iter().copied()) {
            stats.update(context_of(obs, last), a);
        }
        stats
    }

    pub fn count(&self, c: ContextId, a: Action) -> u32 {
        self.counts[c.index()][a.index()]
    }

    pub fn row(&self, c: ContextId) -> &[u32; NUM_ACTIONS] {
        &self.counts[c.index()]
    }

    pub fn visits(&self, c: ContextId) -> u32 {
        self.counts[c.index()].iter().sum()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn update(&mut self, c: ContextId, a: Action) {
        self.counts[c.index()][a.index()] += 1;
    }

    /// Laplace-rule posterior predictive `(T_{c,a} + 1) / (T_c + A)`.
    pub fn predictive(&self, c: ContextId, a: Action) -> f64 {
        let seen = f64::from(self.count(c, a));
        let visits = f64::from(self.visits(c));
        (seen + 1.0) / (visits + NUM_ACTIONS as f64)
    }

    /// Most frequent action per visited context (ties broken by action order).
    /// This is the maximum a posteriori deterministic device.
    pub fn map_action(&self, c: ContextId) -> Option<Action> {
        let row = self.row(c);
        if row.iter().all(|&n| n == 0) {
            return None;
        }
        let best = (0..NUM_ACTIONS).max_by_key(|&i| (row[i], std::cmp::Reverse(i)))?;
        Action::from_index(best)
    }

    /// Closed-form log marginal likelihood of the recorded counts.
    pub fn batch_log_likelihood(&self) -> f64 {
        let a = NUM_ACTIONS as u64;
        self.counts
            .iter()
            .filter(|row| row.iter().any(|&n| n > 0))
            .map(|row| {
                let visits: u64 = row.iter().map(|&n| u64::from(n)).sum();
                let numer: f64 = row.iter().map(|&n| ln_factorial(u64::from(n))).sum();
                ln_factorial(a - 1) + numer - ln_factorial(visits + a - 1)
            })
            .sum()
    }

    /// Rows of the context-hit table: label plus the four action counts.
    pub fn hit_rows(&self) -> Vec<(String, [u32; NUM_ACTIONS])> {
        ContextId::all()
            .map(|c| (c.label(), *self.row(c)))
            .collect()
    }
}

/// Sequential device scorer. Each `push` returns the predictive probability
/// of the action before folding it into the counts.
#[derive(Debug, Clone, Default)]
pub struct DevicePredictor {
    stats: ContextStats,
    nll: f64,
}

impl DevicePredictor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: ContextId, a: Action) -> f64 {
        let p = self.stats.predictive(c, a);
        self.nll -= p.ln();
        self.stats.update(c, a);
        p
    }

    pub fn nll(&self) -> f64 {
        self.nll
    }

    pub fn stats(&self) -> &ContextStats {
        &self.stats
    }
}

/// Negative log likelihood (nats) of the trajectory's actions under the
/// device mixture, accumulated step by step.
pub fn log_marginal(traj: &Trajectory) -> f64 {
    let mut predictor = DevicePredictor::new();
    for ((obs, last), a) in traj.contexts().zip(traj.actions.iter().copied()) {
        predictor.push(context_of(obs, last), a);
    }
    predictor.nll()
}

/// Same quantity as [`log_marginal`] from the closed-form count product.
pub fn batch_nll(traj: &Trajectory) -> f64 {
    -ContextStats::from_trajectory(traj).batch_log_likelihood()
}

/// Per-step negative log predictive contributions.
pub fn step_nlls(traj: &Trajectory) -> Vec<f64> {
    let mut predictor = DevicePredictor::new();
    traj.contexts()
        .zip(traj.actions.iter().copied())
        .map(|((obs, last), a)| -predictor.push(context_of(obs, last), a).ln())
        .collect()
}
