//! Per-goal planning on the deterministic grid.
//!
//! States are cells. Entering the goal cell yields reward 1; the goal is
//! absorbing with zero continuation value. Value iteration gives
//! `V(s) = gamma^(d - 1)` for a cell at shortest-path distance `d >= 1`, so
//! the optimal action sets coincide with the shortest-path successors, which
//! the breadth-first oracle checks independently.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::gridworld::{Action, Color, GridMap, Pos, NUM_ACTIONS};

pub const DEFAULT_GAMMA: f64 = 0.99;

/// Sweeps stop once the sup-norm change drops below this.
pub const VALUE_TOLERANCE: f64 = 1e-12;

/// Relative tolerance for ties between action values.
pub const TIE_TOLERANCE: f64 = 1e-9;

const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("goal {0} is not present in the map")]
    MissingGoal(Color),
    #[error("discount factor must lie in (0, 1), got {0}")]
    BadDiscount(f64),
    #[error("map has no balloons to plan for")]
    NoGoals,
}

/// A subset of the four actions, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);
    pub const ALL: ActionSet = ActionSet(0b1111);

    pub fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.index();
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }

    pub fn complement(self) -> ActionSet {
        ActionSet(!self.0 & 0b1111)
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::EMPTY;
        for a in iter {
            set.insert(a);
        }
        set
    }
}

impl fmt::Debug for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Goal colour, its cell, and the reward of 1 for entering that cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoalSpec {
    pub color: Color,
    pub cell: Pos,
}

impl GoalSpec {
    pub fn for_color(map: &GridMap, color: Color) -> Result<GoalSpec, PlanError> {
        map.goal(color)
            .map(|cell| GoalSpec { color, cell })
            .ok_or(PlanError::MissingGoal(color))
    }

    pub fn reward(&self, from: Pos, to: Pos) -> f64 {
        if from != self.cell && to == self.cell {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct GoalPlan {
    goal: GoalSpec,
    gamma: f64,
    values: Vec<f64>,
    q_values: Vec<[f64; NUM_ACTIONS]>,
    optimal: Vec<ActionSet>,
    sweep_deltas: Vec<f64>,
}

impl GoalPlan {
    pub fn goal(&self) -> GoalSpec {
        self.goal
    }

    pub fn color(&self) -> Color {
        self.goal.color
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn value(&self, map: &GridMap, s: Pos) -> f64 {
        self.values[map.index_of(s)]
    }

    pub fn q(&self, map: &GridMap, s: Pos, a: Action) -> f64 {
        self.q_values[map.index_of(s)][a.index()]
    }

    pub fn optimal_actions(&self, map: &GridMap, s: Pos) -> ActionSet {
        self.optimal[map.index_of(s)]
    }

    /// Sup-norm change of each value-iteration sweep, in order.
    pub fn sweep_deltas(&self) -> &[f64] {
        &self.sweep_deltas
    }
}

pub fn optimal_actions(plan: &GoalPlan, map: &GridMap, s: Pos) -> ActionSet {
    plan.optimal_actions(map, s)
}

fn q_row(map: &GridMap, goal: &GoalSpec, gamma: f64, values: &[f64], s: Pos) -> [f64; NUM_ACTIONS] {
    let mut row = [0.0; NUM_ACTIONS];
    if s == goal.cell {
        return row;
    }
    for a in Action::ALL {
        let next = map.step(s, a);
        row[a.index()] = goal.reward(s, next) + gamma * values[map.index_of(next)];
    }
    row
}

/// Synchronous value iteration for one goal.
pub fn solve_goal(map: &GridMap, goal: GoalSpec, gamma: f64) -> Result<GoalPlan, PlanError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(PlanError::BadDiscount(gamma));
    }
    if map.goal(goal.color) != Some(goal.cell) {
        return Err(PlanError::MissingGoal(goal.color));
    }
    let n = map.num_cells();
    let open: Vec<Pos> = map.open_cells().collect();
    let mut values = vec![0.0; n];
    let mut sweep_deltas = Vec::new();

    for _ in 0..MAX_SWEEPS {
        let mut next = vec![0.0; n];
        let mut delta: f64 = 0.0;
        let mut settled = true;
        for &s in &open {
            let v = q_row(map, &goal, gamma, &values, s)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            let i = map.index_of(s);
            let change = (v - values[i]).abs();
            delta = delta.max(change);
            // Relative per cell: with small discounts the far values are far below
            // any absolute tolerance long before they are reached.
            settled &= change <= VALUE_TOLERANCE * v.abs();
            next[i] = v;
        }
        values = next;
        sweep_deltas.push(delta);
        if settled {
            break;
        }
    }

    let mut q_values = vec![[0.0; NUM_ACTIONS]; n];
    let mut optimal = vec![ActionSet::EMPTY; n];
    for &s in &open {
        let row = q_row(map, &goal, gamma, &values, s);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = best - TIE_TOLERANCE * best.abs();
        let i = map.index_of(s);
        optimal[i] = Action::ALL
            .into_iter()
            .filter(|a| row[a.index()] >= cutoff)
            .collect();
        q_values[i] = row;
    }

    Ok(GoalPlan {
        goal,
        gamma,
        values,
        q_values,
        optimal,
        sweep_deltas,
    })
}

/// Shortest-path step counts to `goal` for every cell; `None` for walls and
/// cells that cannot reach the goal.
pub fn bfs_distances(map: &GridMap, goal: Pos) -> Vec<Option<usize>> {
    let mut dist = vec![None; map.num_cells()];
    if map.is_wall(goal) {
        return dist;
    }
    // Moves are reversible on the grid, so searching outward from the goal
    // yields distances to it.
    dist[map.index_of(goal)] = Some(0);
    let mut queue = VecDeque::from([goal]);
    while let Some(p) = queue.pop_front() {
        let d = dist[map.index_of(p)].expect("queued cells have a distance");
        for a in Action::ALL {
            let q = map.step(p, a);
            let slot = &mut dist[map.index_of(q)];
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back(q);
            }
        }
    }
    dist
}

/// Actions minimising `1 + dist(step(s, a))`; all actions at the goal or when
/// the goal is unreachable.
pub fn bfs_optimal_actions(map: &GridMap, dist: &[Option<usize>], goal: Pos, s: Pos) -> ActionSet {
    if s == goal || dist[map.index_of(s)].is_none() {
        return ActionSet::ALL;
    }
    let cost = |a: Action| dist[map.index_of(map.step(s, a))].map(|d| d + 1);
    let best = Action::ALL.into_iter().filter_map(cost).min();
    Action::ALL
        .into_iter()
        .filter(|&a| cost(a).is_some() && cost(a) == best)
        .collect()
}

/// Plans for every balloon in a map, in colour order.
#[derive(Debug, Clone)]
pub struct PlanSet {
    gamma: f64,
    plans: Vec<GoalPlan>,
}

impl PlanSet {
    pub fn solve(map: &GridMap, gamma: f64) -> Result<PlanSet, PlanError> {
        if map.goals().is_empty() {
            return Err(PlanError::NoGoals);
        }
        let plans = map
            .goals()
            .iter()
            .map(|&(color, cell)| solve_goal(map, GoalSpec { color, cell }, gamma))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PlanSet { gamma, plans })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn plans(&self) -> &[GoalPlan] {
        &self.plans
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn colors(&self) -> Vec<Color> {
        self.plans.iter().map(GoalPlan::color).collect()
    }

    pub fn get(&self, color: Color) -> Option<&GoalPlan> {
        self.plans.iter().find(|p| p.color() == color)
    }
}
