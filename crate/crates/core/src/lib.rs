//! Agent-versus-device stance classification on a gridworld.
//!
//! A trajectory is scored twice: by a context-conditioned Dirichlet device
//! and by a mixture of epsilon-greedy goal seekers. The two marginal
//! likelihoods give the posterior that the system is an agent.

pub mod agent;
pub mod behavior;
pub mod device;
pub mod export;
pub mod gridworld;
pub mod logspace;
pub mod planner;
pub mod scenario;
pub mod switching;
pub mod trajfile;
pub mod verdict;

pub use gridworld::{format_actions, parse_actions, replay, Action, CellKind, Color, GridMap, Pos, Trajectory};
pub use planner::{PlanSet, DEFAULT_GAMMA};
pub use scenario::{Scenario, ScenarioParams};
pub use switching::DEFAULT_EPSILON_POINTS;
pub use verdict::{assess, assess_actions, AssessConfig, StepReadout, Tracker, VerdictError, VerdictReport, World};
