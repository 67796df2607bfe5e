//! Named scenarios on a map, mirroring the six demonstration trajectories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{generate_actions, Behavior, BehaviorError};
use crate::gridworld::{replay, Action, Color, GridMap, Trajectory};
use crate::planner::bfs_distances;

/// Length of the suboptimal route to the blue balloon.
pub const EPSBLUE_ROUTE_LEN: usize = 66;
/// Shortest route to the blue balloon on the shipped map.
pub const EPSBLUE_OPTIMUM: usize = 36;
/// Exploration rate of the seeker used to draw suboptimal blue routes.
pub const EPSBLUE_EPSILON: f64 = 0.25;
/// Number of seeds tried when searching for a route of the right length.
pub const EPSBLUE_SEED_BUDGET: u64 = 20_000;
/// Step at which the switching scenario abandons magenta for green.
pub const SWITCH_STEP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Circle,
    Magenta,
    EpsBlue,
    FollowWalls,
    #[serde(rename = "switchB")]
    SwitchB,
    Random,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Circle,
        Scenario::Magenta,
        Scenario::EpsBlue,
        Scenario::FollowWalls,
        Scenario::SwitchB,
        Scenario::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Circle => "circle",
            Scenario::Magenta => "magenta",
            Scenario::EpsBlue => "epsblue",
            Scenario::FollowWalls => "followwalls",
            Scenario::SwitchB => "switchB",
            Scenario::Random => "random",
        }
    }

    /// Whether the scenario is scored with the switching agent mixture by default.
    pub fn uses_switching(self) -> bool {
        self == Scenario::SwitchB
    }

    pub fn default_seed(self) -> u64 {
        match self {
            Scenario::Circle | Scenario::FollowWalls => 0,
            Scenario::Magenta | Scenario::Random => 1,
            Scenario::EpsBlue | Scenario::SwitchB => 0,
        }
    }

    pub fn default_steps(self) -> Option<usize> {
        match self {
            Scenario::Circle => Some(25),
            Scenario::FollowWalls => Some(60),
            Scenario::Random => Some(100),
            Scenario::Magenta | Scenario::EpsBlue | Scenario::SwitchB => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scenario {0:?}; expected one of circle, magenta, epsblue, followwalls, switchB, random")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error("no {len}-step route to {goal} found within {budget} seeds")]
    NoRoute { goal: Color, len: usize, budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScenarioParams {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
}

/// Actions for a scenario on `map`.
///
/// `epsblue` draws epsilon-greedy routes to blue for successive seeds and
/// keeps the first that reaches the balloon in exactly
/// [`EPSBLUE_ROUTE_LEN`] steps (`steps` overrides the length).
pub fn scenario_actions(map: &GridMap, scenario: Scenario, params: ScenarioParams) -> Result<Vec<Action>, ScenarioError> {
    let seed = params.seed.unwrap_or(scenario.default_seed());
    let steps = params.steps.or(scenario.default_steps());
    let behavior = match scenario {
        Scenario::Circle => Behavior::Circle {
            steps: steps.unwrap_or(25),
        },
        Scenario::FollowWalls => Behavior::FollowWalls {
            steps: steps.unwrap_or(60),
        },
        Scenario::Random => Behavior::Random {
            steps: steps.unwrap_or(100),
            seed,
        },
        Scenario::Magenta => Behavior::GoalSeeker {
            goal: Color::Magenta,
            epsilon: 0.0,
            seed,
            steps,
        },
        Scenario::SwitchB => Behavior::SwitchingSeeker {
            first: Color::Magenta,
            second: Color::Green,
            switch_step: SWITCH_STEP,
            epsilon: 0.0,
            seed,
            steps,
        },
        Scenario::EpsBlue => {
            let len = steps.unwrap_or(EPSBLUE_ROUTE_LEN);
            return suboptimal_route(map, Color::Blue, len, EPSBLUE_EPSILON, seed);
        }
    };
    Ok(generate_actions(map, &behavior)?)
}

/// First epsilon-greedy route (over seeds `seed, seed + 1, ...`) that reaches
/// `goal` in exactly `len` steps.
pub fn suboptimal_route(map: &GridMap, goal: Color, len: usize, epsilon: f64, seed: u64) -> Result<Vec<Action>, ScenarioError> {
    let cell = map.goal(goal).ok_or(BehaviorError::MissingGoal(goal))?;
    let optimum = bfs_distances(map, cell)[map.index_of(map.start())];
    let budget = EPSBLUE_SEED_BUDGET;
    // No route can beat the shortest path.
    if optimum.is_some_and(|d| d <= len) {
        for s in seed..seed.saturating_add(budget) {
            let behavior = Behavior::GoalSeeker {
                goal,
                epsilon,
                seed: s,
                steps: None,
            };
            match generate_actions(map, &behavior) {
                Ok(actions) if actions.len() == len => return Ok(actions),
                Ok(_) | Err(BehaviorError::GoalNotReached { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
    Err(ScenarioError::NoRoute { goal, len, budget })
}

pub fn scenario_trajectory(map: &GridMap, scenario: Scenario, params: ScenarioParams) -> Result<Trajectory, ScenarioError> {
    scenario_actions(map, scenario, params).map(|a| replay(map, &a))
}
