//! Switching-prior agent mixture.
//!
//! For every exploration rate on a fixed grid the goal policies are combined
//! by a switching mixture: after step `t` the weights move to
//! `t/(t+1) * posterior + 1/(t+1) * prior`, so the active goal may change at
//! any time with probability `1/(t+1)`. The grid components are averaged
//! uniformly.

use crate::agent::GreedyStep;
use crate::gridworld::{GridMap, Trajectory};
use crate::logspace::log_sum_exp;
use crate::planner::PlanSet;

pub const DEFAULT_EPSILON_POINTS: usize = 50;

/// Evenly spaced exploration rates `k / (n - 1)`, endpoints included.
pub fn epsilon_grid(points: usize) -> Vec<f64> {
    assert!(points >= 2, "epsilon grid needs at least two points");
    (0..points).map(|k| k as f64 / (points - 1) as f64).collect()
}

/// Switching mixture over a fixed set of policies for one exploration rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchComponent {
    weights: Vec<f64>,
    log_likelihood: f64,
    t: u64,
}

impl SwitchComponent {
    pub fn new(policies: usize) -> Self {
        assert!(policies > 0, "switching mixture over no policies");
        SwitchComponent {
            weights: vec![1.0 / policies as f64; policies],
            log_likelihood: 0.0,
            t: 1,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Folds in one action given each policy's probability for it; returns
    /// the mixture probability of the action.
    pub fn step(&mut self, probs: &[f64]) -> f64 {
        assert_eq!(probs.len(), self.weights.len());
        let n = self.weights.len() as f64;
        let prior = 1.0 / n;
        let switch: f64 = self.weights.iter().zip(probs).map(|(w, p)| w * p).sum();
        let t = self.t as f64;
        if switch > 0.0 {
            self.log_likelihood += switch.ln();
            for (w, &p) in self.weights.iter_mut().zip(probs) {
                *w = t / (t + 1.0) * (*w * p / switch) + prior / (t + 1.0);
            }
            // Rounding drift only; keeps the simplex invariant tight over long runs.
            let total: f64 = self.weights.iter().sum();
            self.weights.iter_mut().for_each(|w| *w /= total);
        } else {
            self.log_likelihood = f64::NEG_INFINITY;
            self.weights.iter_mut().for_each(|w| *w = prior);
        }
        self.t += 1;
        switch
    }
}

/// All grid components, advanced together.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchState {
    grid: Vec<f64>,
    components: Vec<SwitchComponent>,
    steps: u64,
}

impl SwitchState {
    pub fn new(policies: usize, epsilon_points: usize) -> Self {
        let grid = epsilon_grid(epsilon_points);
        let components = grid.iter().map(|_| SwitchComponent::new(policies)).collect();
        SwitchState {
            grid,
            components,
            steps: 0,
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn components(&self) -> &[SwitchComponent] {
        &self.components
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Advances every component by one step; `steps[i]` describes the action
    /// with respect to policy `i`'s goal. Returns the per-epsilon step
    /// probabilities.
    pub fn step(&mut self, steps: &[GreedyStep]) -> Vec<f64> {
        let mut probs = Vec::with_capacity(steps.len());
        let out = self
            .grid
            .iter()
            .zip(self.components.iter_mut())
            .map(|(&eps, comp)| {
                probs.clear();
                probs.extend(steps.iter().map(|s| s.probability(eps)));
                comp.step(&probs)
            })
            .collect();
        self.steps += 1;
        out
    }

    /// `ln sum_eps (1/N) Switch_eps(a_{1:t})`.
    pub fn log_likelihood(&self) -> f64 {
        let weight = -(self.components.len() as f64).ln();
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| weight + c.log_likelihood())
            .collect();
        log_sum_exp(&terms)
    }

    /// Posterior weight of each grid component.
    pub fn component_posterior(&self) -> Vec<f64> {
        let logs: Vec<f64> = self.components.iter().map(|c| c.log_likelihood()).collect();
        let z = log_sum_exp(&logs);
        logs.iter().map(|l| (l - z).exp()).collect()
    }

    /// Goal probabilities: component weights averaged under the component posterior.
    pub fn goal_posterior(&self) -> Vec<f64> {
        let omega = self.component_posterior();
        let mut out = vec![0.0; self.components[0].weights.len()];
        for (o, comp) in omega.iter().zip(&self.components) {
            if *o == 0.0 {
                continue;
            }
            for (acc, w) in out.iter_mut().zip(&comp.weights) {
                *acc += o * w;
            }
        }
        out
    }

    /// Exploration rate of the most probable grid component.
    pub fn map_epsilon(&self) -> f64 {
        let post = self.component_posterior();
        let best = (0..post.len())
            .max_by(|&a, &b| post[a].total_cmp(&post[b]))
            .expect("non-empty grid");
        self.grid[best]
    }
}

/// Per-step greedy records for all goals: `result[t][g]`.
pub fn step_table(map: &GridMap, traj: &Trajectory, plans: &PlanSet) -> Vec<Vec<GreedyStep>> {
    traj.actions
        .iter()
        .enumerate()
        .map(|(t, &a)| {
            plans
                .plans()
                .iter()
                .map(|plan| {
                    let set = plan.optimal_actions(map, traj.positions[t]);
                    GreedyStep::new(set.len() as u8, set.contains(a))
                })
                .collect()
        })
        .collect()
}

/// Log likelihood of the trajectory under the switching agent mixture.
pub fn switching_log_likelihood(map: &GridMap, traj: &Trajectory, plans: &PlanSet, epsilon_points: usize) -> f64 {
    let mut state = SwitchState::new(plans.len(), epsilon_points);
    for steps in step_table(map, traj, plans) {
        state.step(&steps);
    }
    state.log_likelihood()
}

/// Goal posterior after each prefix, starting with the uniform prior at `t = 0`.
pub fn goal_posterior_trace(map: &GridMap, traj: &Trajectory, plans: &PlanSet, epsilon_points: usize) -> Vec<Vec<f64>> {
    let mut state = SwitchState::new(plans.len(), epsilon_points);
    let mut trace = vec![state.goal_posterior()];
    for steps in step_table(map, traj, plans) {
        state.step(&steps);
        trace.push(state.goal_posterior());
    }
    trace
}
