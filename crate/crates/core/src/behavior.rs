//! Built-in behaviour generators.
//!
//! All generators are deterministic functions of their parameters; the
//! stochastic ones draw from a `ChaCha8` stream seeded with `seed`.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gridworld::{replay, Action, CellKind, Color, GridMap, Pos, Trajectory, INITIAL_LAST_ACTION};
use crate::planner::{solve_goal, GoalPlan, GoalSpec, PlanError, DEFAULT_GAMMA};

/// Safety cap for generators that run until a balloon is reached.
pub const MAX_SEEK_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BehaviorError {
    #[error("goal {0} is not present in the map")]
    MissingGoal(Color),
    #[error("exploration rate must lie in [0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("goal {goal} not reached within {limit} steps")]
    GoalNotReached { goal: Color, limit: usize },
}

impl From<PlanError> for BehaviorError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::MissingGoal(c) => BehaviorError::MissingGoal(c),
            other => unreachable!("generator planning failed: {other}"),
        }
    }
}

/// Clockwise loop used by the circle behaviour.
pub const CIRCLE_PATTERN: [Action; 8] = [
    Action::Right,
    Action::Right,
    Action::Down,
    Action::Down,
    Action::Left,
    Action::Left,
    Action::Up,
    Action::Up,
];

#[derive(Debug, Clone, PartialEq)]
pub enum Behavior {
    /// Repeats [`CIRCLE_PATTERN`].
    Circle { steps: usize },
    /// Keeps going straight and turns left when facing a wall.
    FollowWalls { steps: usize },
    /// Uniformly random actions.
    Random { steps: usize, seed: u64 },
    /// Epsilon-greedy with respect to one goal. With `steps: None` it stops on
    /// reaching the balloon.
    GoalSeeker {
        goal: Color,
        epsilon: f64,
        seed: u64,
        steps: Option<usize>,
    },
    /// Seeks `first` for `switch_step` actions, then `second`. With
    /// `steps: None` it stops on reaching `second`.
    SwitchingSeeker {
        first: Color,
        second: Color,
        switch_step: usize,
        epsilon: f64,
        seed: u64,
        steps: Option<usize>,
    },
}

/// The wall-following device: continue in the last direction unless a wall
/// is ahead, then turn left.
pub fn follow_walls_action(observation: CellKind, last_action: Action) -> Action {
    if observation != CellKind::Wall {
        return last_action;
    }
    match last_action {
        Action::Up => Action::Left,
        Action::Down => Action::Right,
        Action::Left => Action::Down,
        Action::Right => Action::Up,
    }
}

fn check_epsilon(eps: f64) -> Result<(), BehaviorError> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(BehaviorError::BadEpsilon(eps))
    }
}

fn plan_for(map: &GridMap, goal: Color) -> Result<GoalPlan, BehaviorError> {
    let spec = GoalSpec::for_color(map, goal)?;
    Ok(solve_goal(map, spec, DEFAULT_GAMMA)?)
}

/// One epsilon-greedy draw: an optimal action with probability `1 - eps`,
/// otherwise a non-optimal one, each uniformly.
fn epsilon_greedy(map: &GridMap, plan: &GoalPlan, pos: Pos, eps: f64, rng: &mut ChaCha8Rng) -> Action {
    let best = plan.optimal_actions(map, pos);
    let explore = rng.random::<f64>() < eps;
    let pool: Vec<Action> = if explore && best.len() < 4 {
        best.complement().iter().collect()
    } else {
        best.iter().collect()
    };
    *pool.choose(rng).expect("optimal set is never empty")
}

fn seek(
    map: &GridMap,
    plan: &GoalPlan,
    mut pos: Pos,
    eps: f64,
    rng: &mut ChaCha8Rng,
    steps: Option<usize>,
    out: &mut Vec<Action>,
) -> Result<Pos, BehaviorError> {
    let goal = plan.goal();
    match steps {
        Some(n) => {
            for _ in 0..n {
                let a = epsilon_greedy(map, plan, pos, eps, rng);
                pos = map.step(pos, a);
                out.push(a);
            }
        }
        None => {
            let mut taken = 0;
            while pos != goal.cell {
                if taken == MAX_SEEK_STEPS {
                    return Err(BehaviorError::GoalNotReached {
                        goal: goal.color,
                        limit: MAX_SEEK_STEPS,
                    });
                }
                let a = epsilon_greedy(map, plan, pos, eps, rng);
                pos = map.step(pos, a);
                out.push(a);
                taken += 1;
            }
        }
    }
    Ok(pos)
}

/// Generates the action sequence for a behaviour, starting at the map's start cell.
pub fn generate_actions(map: &GridMap, behavior: &Behavior) -> Result<Vec<Action>, BehaviorError> {
    match *behavior {
        Behavior::Circle { steps } => Ok(CIRCLE_PATTERN.iter().copied().cycle().take(steps).collect()),
        Behavior::FollowWalls { steps } => {
            let mut pos = map.start();
            let mut last = INITIAL_LAST_ACTION;
            let mut seen = map.observe(pos, last);
            let mut out = Vec::with_capacity(steps);
            for _ in 0..steps {
                let a = follow_walls_action(seen, last);
                pos = map.step(pos, a);
                seen = map.observe(pos, a);
                last = a;
                out.push(a);
            }
            Ok(out)
        }
        Behavior::Random { steps, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..steps)
                .map(|_| Action::ALL[rng.random_range(0..Action::ALL.len())])
                .collect())
        }
        Behavior::GoalSeeker {
            goal,
            epsilon,
            seed,
            steps,
        } => {
            check_epsilon(epsilon)?;
            let plan = plan_for(map, goal)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::new();
            seek(map, &plan, map.start(), epsilon, &mut rng, steps, &mut out)?;
            Ok(out)
        }
        Behavior::SwitchingSeeker {
            first,
            second,
            switch_step,
            epsilon,
            seed,
            steps,
        } => {
            check_epsilon(epsilon)?;
            let first_plan = plan_for(map, first)?;
            let second_plan = plan_for(map, second)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::new();
            let pos = seek(map, &first_plan, map.start(), epsilon, &mut rng, Some(switch_step), &mut out)?;
            let rest = steps.map(|n| n.saturating_sub(switch_step));
            seek(map, &second_plan, pos, epsilon, &mut rng, rest, &mut out)?;
            Ok(out)
        }
    }
}

pub fn generate_behavior(map: &GridMap, behavior: &Behavior) -> Result<Trajectory, BehaviorError> {
    generate_actions(map, behavior).map(|actions| replay(map, &actions))
}
