//! Agent hypothesis: an epsilon-greedy follower of one of the goals.
//!
//! For a goal `u`, a step is greedy when the action lies in the optimal set
//! `A*` of the cell it was taken from. The factorised epsilon-greedy policy
//! gives a greedy action probability `(1 - eps) / |A*|` and a non-greedy one
//! `eps / (4 - |A*|)`. Under a uniform prior on `eps` the integral is a Beta
//! function, so the epsilon-marginal depends only on the per-step set sizes
//! and on the greedy count.

use serde::{Deserialize, Serialize};

use crate::gridworld::{Color, GridMap, Trajectory, NUM_ACTIONS};
use crate::logspace::{ln_binomial, log_sum_exp, xlogy};
use crate::planner::{GoalPlan, PlanSet};

/// One step of a greedy profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyStep {
    /// `|A*|` at the cell the action was taken from, in `1..=4`.
    pub optimal: u8,
    pub greedy: bool,
}

impl GreedyStep {
    pub fn new(optimal: u8, greedy: bool) -> Self {
        assert!((1..=4).contains(&optimal), "optimal-set size {optimal}");
        assert!(greedy || optimal < 4, "a step cannot be non-greedy when every action is optimal");
        GreedyStep { optimal, greedy }
    }

    /// `ln(1/|A*|)` for greedy steps, `ln(1/(4 - |A*|))` otherwise.
    fn log_factor(self) -> f64 {
        let n = if self.greedy {
            f64::from(self.optimal)
        } else {
            (NUM_ACTIONS as u8 - self.optimal) as f64
        };
        -n.ln()
    }

    /// Probability of this step under the epsilon-greedy policy.
    pub fn probability(self, eps: f64) -> f64 {
        if self.greedy {
            (1.0 - eps) / f64::from(self.optimal)
        } else {
            eps / f64::from(NUM_ACTIONS as u8 - self.optimal)
        }
    }
}

/// Greedy/non-greedy record of a trajectory with respect to one goal.
///
/// The running sums make appending a step O(1), which the incremental
/// scorer relies on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GreedyProfile {
    steps: Vec<GreedyStep>,
    greedy: u64,
    log_factors: f64,
}

impl GreedyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_steps(steps: impl IntoIterator<Item = GreedyStep>) -> Self {
        let mut profile = GreedyProfile::new();
        for s in steps {
            profile.push(s);
        }
        profile
    }

    pub fn push(&mut self, step: GreedyStep) {
        self.greedy += u64::from(step.greedy);
        self.log_factors += step.log_factor();
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[GreedyStep] {
        &self.steps
    }

    pub fn len(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `T+`: number of greedy steps.
    pub fn greedy_count(&self) -> u64 {
        self.greedy
    }

    /// `T-`: number of non-greedy steps.
    pub fn non_greedy_count(&self) -> u64 {
        self.len() - self.greedy
    }

    /// Sum of the per-step `ln(1/|A*|)` and `ln(1/(4-|A*|))` factors.
    pub fn log_factors(&self) -> f64 {
        self.log_factors
    }
}

/// Records, for every step, whether the action was optimal for `plan`'s goal.
pub fn greedy_profile(map: &GridMap, traj: &Trajectory, plan: &GoalPlan) -> GreedyProfile {
    GreedyProfile::from_steps(traj.actions.iter().enumerate().map(|(t, &a)| {
        let set = plan.optimal_actions(map, traj.positions[t]);
        GreedyStep::new(set.len() as u8, set.contains(a))
    }))
}

/// `ln pi_{u,eps}(a_{1:T})` for a fixed exploration rate.
pub fn log_policy_eps(profile: &GreedyProfile, eps: f64) -> f64 {
    assert!((0.0..=1.0).contains(&eps), "eps = {eps}");
    profile.log_factors()
        + xlogy(profile.greedy_count(), 1.0 - eps)
        + xlogy(profile.non_greedy_count(), eps)
}

/// `ln` of the epsilon-greedy likelihood integrated over a uniform prior on
/// epsilon: `factors * 1/(T+1) * C(T, T+)^-1`.
pub fn log_policy_integrated(profile: &GreedyProfile) -> f64 {
    let t = profile.len();
    profile.log_factors() - ((t + 1) as f64).ln() - ln_binomial(t, profile.greedy_count())
}

/// Maximiser of [`log_policy_eps`]: the fraction of non-greedy steps.
pub fn map_epsilon(profile: &GreedyProfile) -> f64 {
    assert!(!profile.is_empty(), "MAP epsilon of an empty profile");
    profile.non_greedy_count() as f64 / profile.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("the agent mixture needs at least one goal")]
pub struct EmptyGoalSet;

/// Uniform mixture over goals of the epsilon-integrated likelihoods.
pub fn log_mixture_of_profiles(profiles: &[GreedyProfile]) -> Result<f64, EmptyGoalSet> {
    if profiles.is_empty() {
        return Err(EmptyGoalSet);
    }
    let weight = -(profiles.len() as f64).ln();
    let terms: Vec<f64> = profiles
        .iter()
        .map(|p| weight + log_policy_integrated(p))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// Log likelihood of the trajectory under the non-switching agent mixture.
pub fn log_mixture_goals(map: &GridMap, traj: &Trajectory, plans: &PlanSet) -> Result<f64, EmptyGoalSet> {
    let profiles = profiles_for(map, traj, plans);
    log_mixture_of_profiles(&profiles)
}

pub fn profiles_for(map: &GridMap, traj: &Trajectory, plans: &PlanSet) -> Vec<GreedyProfile> {
    plans
        .plans()
        .iter()
        .map(|plan| greedy_profile(map, traj, plan))
        .collect()
}

/// Posterior over goals within the agent mixture (sums to 1).
pub fn goal_weights(profiles: &[GreedyProfile]) -> Vec<f64> {
    let logs: Vec<f64> = profiles.iter().map(log_policy_integrated).collect();
    let z = log_sum_exp(&logs);
    logs.iter().map(|l| (l - z).exp()).collect()
}

/// Epsilon on the grid `{k/(n-1)}` maximising the uniform goal mixture of
/// fixed-epsilon likelihoods.
pub fn grid_map_epsilon(profiles: &[GreedyProfile], grid: &[f64]) -> f64 {
    let weight = -(profiles.len() as f64).ln();
    grid.iter()
        .copied()
        .map(|eps| {
            let terms: Vec<f64> = profiles
                .iter()
                .map(|p| weight + log_policy_eps(p, eps))
                .collect();
            (eps, log_sum_exp(&terms))
        })
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
        .0
}

/// Per-goal summary carried into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSummary {
    pub color: Color,
    pub greedy_steps: u64,
    pub non_greedy_steps: u64,
    pub log_likelihood: f64,
    pub map_epsilon: Option<f64>,
}

impl GoalSummary {
    pub fn from_profile(color: Color, profile: &GreedyProfile) -> Self {
        GoalSummary {
            color,
            greedy_steps: profile.greedy_count(),
            non_greedy_steps: profile.non_greedy_count(),
            log_likelihood: log_policy_integrated(profile),
            map_epsilon: (!profile.is_empty()).then(|| map_epsilon(profile)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{replay, Action, GridMap};
    use crate::planner::PlanSet;

    fn g(n: u8) -> GreedyStep {
        GreedyStep::new(n, true)
    }

    fn ng(n: u8) -> GreedyStep {
        GreedyStep::new(n, false)
    }

    #[test]
    fn fixed_epsilon_step_probabilities() {
        let p = GreedyProfile::from_steps([g(1)]);
        assert!((log_policy_eps(&p, 0.25).exp() - 0.75).abs() < 1e-15);
        let p = GreedyProfile::from_steps([ng(1)]);
        assert!((log_policy_eps(&p, 0.3).exp() - 0.1).abs() < 1e-15);
        assert_eq!(log_policy_eps(&p, 0.0), f64::NEG_INFINITY);
        let p = GreedyProfile::from_steps([g(2)]);
        assert_eq!(log_policy_eps(&p, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn integrated_closed_forms() {
        // Integral of (1-e)^2 over [0, 1].
        let p = GreedyProfile::from_steps([g(1), g(1)]);
        assert!((log_policy_integrated(&p).exp() - 1.0 / 3.0).abs() < 1e-14);
        // (1/2) * integral of (1-e)^3.
        let p = GreedyProfile::from_steps([g(2), g(1), g(1)]);
        assert!((log_policy_integrated(&p).exp() - 1.0 / 8.0).abs() < 1e-14);
        // (1/3) * integral of e(1-e).
        let p = GreedyProfile::from_steps([g(1), ng(1)]);
        assert!((log_policy_integrated(&p).exp() - 1.0 / 18.0).abs() < 1e-14);
    }

    #[test]
    fn map_epsilon_is_non_greedy_fraction() {
        assert_eq!(map_epsilon(&GreedyProfile::from_steps([g(1); 4])), 0.0);
        assert_eq!(map_epsilon(&GreedyProfile::from_steps([ng(1); 4])), 1.0);
        let p = GreedyProfile::from_steps([g(1), g(2), ng(1), ng(3), ng(2)]);
        assert!((map_epsilon(&p) - 0.6).abs() < 1e-15);
        // (1-e)^2 e^3 is maximal at 0.6 among nearby values.
        let at = |e: f64| log_policy_eps(&p, e);
        assert!(at(0.6) > at(0.59) && at(0.6) > at(0.61));
    }

    #[test]
    fn mixture_of_equal_goals_is_that_goal() {
        let p = GreedyProfile::from_steps([g(1), ng(2), g(3)]);
        let l = log_policy_integrated(&p);
        let all = vec![p.clone(); 4];
        assert!((log_mixture_of_profiles(&all).unwrap() - l).abs() < 1e-14);
        assert!((log_mixture_of_profiles(&all[..1]).unwrap() - l).abs() < 1e-15);
        assert_eq!(log_mixture_of_profiles(&[]), Err(EmptyGoalSet));
    }

    #[test]
    fn dominant_goal_carries_mixture() {
        // 20 greedy unit-set steps against 20 non-greedy: the first wins by a wide margin.
        let strong = GreedyProfile::from_steps([g(1); 20]);
        let weak = GreedyProfile::from_steps([ng(1); 20]);
        let gap = log_policy_integrated(&strong) - log_policy_integrated(&weak);
        assert!(gap > 20.0);
        let mix = log_mixture_of_profiles(&[strong.clone(), weak.clone(), weak.clone(), weak]).unwrap();
        let dominant = log_policy_integrated(&strong) - 4f64.ln();
        assert!(((mix - dominant).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn profile_against_plans() {
        let map = GridMap::parse("#########\n#G..A...#\n#########").unwrap();
        let plans = PlanSet::solve(&map, 0.99).unwrap();
        // Moving away from the green balloon along the corridor.
        let traj = replay(&map, &[Action::Right; 3]);
        let p = greedy_profile(&map, &traj, &plans.plans()[0]);
        assert_eq!(p.greedy_count(), 0);
        // Straight at it, then two steps while sitting on it.
        let traj = replay(&map, &[Action::Left, Action::Left, Action::Left, Action::Up, Action::Right]);
        let p = greedy_profile(&map, &traj, &plans.plans()[0]);
        assert_eq!(p.non_greedy_count(), 0);
        assert_eq!(p.steps()[3].optimal, 4);
        assert_eq!(p.steps()[4].optimal, 4);
    }
}
