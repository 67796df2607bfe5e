//! Acceptance checks, one line per criterion. Run with `cargo test --test acceptance`.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use agency_core::agent::{log_policy_integrated, GreedyProfile, GreedyStep};
use agency_core::behavior::{generate_actions, Behavior};
use agency_core::device::ContextStats;
use agency_core::gridworld::{parse_actions, replay, Action, Color, GridMap, Pos, Trajectory};
use agency_core::scenario::{scenario_trajectory, Scenario, ScenarioParams, EPSBLUE_OPTIMUM, EPSBLUE_ROUTE_LEN};
use agency_core::switching::{epsilon_grid, step_table, SwitchState};
use agency_core::verdict::{assess, AssessConfig, Tracker, VerdictReport, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ---- oracles ---------------------------------------------------------------

/// Trapezoid rule over `[0, 1]` of the product of per-step policy probabilities.
fn trapezoid_policy(steps: &[GreedyStep], points: usize) -> f64 {
    let h = 1.0 / (points - 1) as f64;
    let f = |eps: f64| -> f64 {
        steps
            .iter()
            .map(|s| {
                let k = s.optimal as f64;
                if s.greedy {
                    (1.0 - eps) / k
                } else {
                    eps / (4.0 - k)
                }
            })
            .product()
    };
    let inner: f64 = (1..points - 1).map(|i| f(i as f64 * h)).sum();
    h * (inner + 0.5 * (f(0.0) + f(1.0)))
}

/// Product of Laplace-rule predictives, counting contexts by hand.
fn laplace_sequential(map: &GridMap, actions: &[Action]) -> f64 {
    let mut counts = std::collections::HashMap::<(usize, Action), [u32; 4]>::new();
    let mut pos = map.start();
    let mut last = Action::Up;
    let mut ahead = map.observe(pos, last);
    let mut log_p = 0.0;
    for &a in actions {
        let row = counts.entry((ahead.index(), last)).or_insert([0; 4]);
        let total: u32 = row.iter().sum();
        log_p += ((row[a.index()] + 1) as f64 / (total + 4) as f64).ln();
        row[a.index()] += 1;
        pos = map.step(pos, a);
        ahead = map.observe(pos, a);
        last = a;
    }
    log_p
}

/// Shortest-path optimal actions by breadth-first search from the goal.
fn bfs_oracle(map: &GridMap, goal: Pos) -> Vec<Option<Vec<Action>>> {
    let n = map.rows() * map.cols();
    let idx = |p: Pos| p.row * map.cols() + p.col;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    dist[idx(goal)] = 0;
    queue.push_back(goal);
    // Moves are reversible on a grid, so distances from the goal equal distances to it.
    while let Some(p) = queue.pop_front() {
        for a in Action::ALL {
            let q = map.step(p, a);
            if dist[idx(q)] == usize::MAX {
                dist[idx(q)] = dist[idx(p)] + 1;
                queue.push_back(q);
            }
        }
    }
    let mut out = vec![None; n];
    for row in 0..map.rows() {
        for col in 0..map.cols() {
            let p = Pos::new(row, col);
            if map.is_wall(p) {
                continue;
            }
            let set = if p == goal || dist[idx(p)] == usize::MAX {
                Action::ALL.to_vec()
            } else {
                let cost = |a: Action| dist[idx(map.step(p, a))];
                let best = Action::ALL.iter().map(|&a| cost(a)).min().unwrap();
                Action::ALL.into_iter().filter(|&a| cost(a) == best).collect()
            };
            out[idx(p)] = Some(set);
        }
    }
    out
}

// ---- criteria --------------------------------------------------------------

fn quadrature() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let len = rng.random_range(1..=50);
        let steps: Vec<GreedyStep> = (0..len)
            .map(|_| GreedyStep::new(rng.random_range(1..=3), rng.random_bool(0.5)))
            .collect();
        let closed = log_policy_integrated(&GreedyProfile::from_steps(steps.iter().copied())).exp();
        let quad = trapezoid_policy(&steps, 10_000);
        worst = worst.max(rel_err(closed, quad));
    }
    ensure(worst <= 1e-6, || format!("worst relative error {worst:.3e}"))?;
    Ok(format!("worst relative error {worst:.2e}"))
}

fn device_equivalence() -> Check {
    let map = GridMap::default_map();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let len = rng.random_range(1..=200);
        let actions = generate_actions(&map, &Behavior::Random { steps: len, seed: 1000 + i }).unwrap();
        let batch = ContextStats::from_trajectory(&replay(&map, &actions)).batch_log_likelihood();
        worst = worst.max(rel_err(batch, laplace_sequential(&map, &actions)));
    }
    ensure(worst <= 1e-12, || format!("worst relative error {worst:.3e}"))?;
    Ok(format!("worst relative error {worst:.2e}"))
}

fn planner_oracle() -> Check {
    let world = World::default_world();
    let map = world.map();
    let mut checked = 0;
    for plan in world.plans().plans() {
        let oracle = bfs_oracle(map, plan.goal().cell);
        for p in map.open_cells() {
            let want = oracle[p.row * map.cols() + p.col].as_ref().unwrap();
            let got: Vec<Action> = plan.optimal_actions(map, p).iter().collect();
            ensure(&got == want, || format!("{} at {p}: {got:?} vs {want:?}", plan.color()))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} cell/goal pairs"))
}

fn scored(scenario: Scenario, switching: bool) -> (Trajectory, VerdictReport) {
    let world = World::default_world();
    let traj = scenario_trajectory(world.map(), scenario, ScenarioParams::default()).unwrap();
    let report = assess(&world, &traj, AssessConfig::switching(switching)).unwrap();
    (traj, report)
}

fn summary(r: &VerdictReport) -> String {
    format!(
        "T={} nll_dev={:.2} nll_agt={:.2} P(agt)={:.4}",
        r.steps, r.nll_dev, r.nll_agt, r.posterior_agt
    )
}

fn circle() -> Check {
    let (traj, r) = scored(Scenario::Circle, false);
    ensure(traj.len() == 25, || format!("{} steps", traj.len()))?;
    ensure(r.posterior_dev > 0.5 && r.posterior_dev > r.posterior_agt, || summary(&r))?;
    Ok(summary(&r))
}

fn magenta() -> Check {
    let (traj, r) = scored(Scenario::Magenta, false);
    let map = GridMap::default_map();
    ensure(traj.end() == map.goal(Color::Magenta).unwrap(), || "route misses magenta".into())?;
    ensure(r.posterior_agt > 0.5, || summary(&r))?;
    Ok(summary(&r))
}

fn follow_walls() -> Check {
    let (traj, r) = scored(Scenario::FollowWalls, false);
    ensure(traj.len() >= 40, || format!("{} steps", traj.len()))?;
    ensure(r.posterior_dev > r.posterior_agt, || summary(&r))?;
    Ok(summary(&r))
}

fn epsblue() -> Check {
    let (traj, r) = scored(Scenario::EpsBlue, false);
    let map = GridMap::default_map();
    let blue = map.goal(Color::Blue).unwrap();
    let optimum = agency_core::planner::bfs_distances(&map, blue)[map.index_of(map.start())];
    ensure(optimum == Some(EPSBLUE_OPTIMUM), || format!("optimum {optimum:?}"))?;
    ensure(traj.len() == EPSBLUE_ROUTE_LEN && traj.end() == blue, || {
        format!("{} steps ending at {}", traj.len(), traj.end())
    })?;
    ensure(r.posterior_agt > r.posterior_dev, || summary(&r))?;
    Ok(summary(&r))
}

fn switching() -> Check {
    let (traj, sw) = scored(Scenario::SwitchB, true);
    let (_, plain) = scored(Scenario::SwitchB, false);
    let map = GridMap::default_map();
    ensure(traj.end() == map.goal(Color::Green).unwrap(), || "route misses green".into())?;
    ensure(sw.nll_agt < plain.nll_agt, || {
        format!("(a) switching {:.2} vs non-switching {:.2}", sw.nll_agt, plain.nll_agt)
    })?;
    ensure(sw.posterior_agt > sw.posterior_dev, || format!("(b) switching {}", summary(&sw)))?;
    ensure(plain.posterior_agt < plain.posterior_dev, || format!("(b) non-switching {}", summary(&plain)))?;

    let argmax = |probs: &[f64]| {
        let i = (0..probs.len()).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
        sw.goal_colors[i]
    };
    let last = argmax(sw.goal_trace.last().unwrap());
    ensure(last == Color::Green, || format!("(c) final maximum is {last}"))?;
    let switch_at = agency_core::scenario::SWITCH_STEP;
    for t in 1..=switch_at {
        let top = argmax(&sw.goal_trace[t]);
        ensure(top == Color::Magenta, || format!("(c) maximum at t={t} is {top}"))?;
    }
    Ok(format!(
        "nll_agt switching {:.2} < {:.2}; P(agt) {:.4} vs {:.4}",
        sw.nll_agt, plain.nll_agt, sw.posterior_agt, plain.posterior_agt
    ))
}

fn random() -> Check {
    let (traj, r) = scored(Scenario::Random, false);
    ensure(traj.len() == 100, || format!("{} steps", traj.len()))?;
    let mean = r.nll_dev / traj.len() as f64;
    let detail = format!("seed 1: mean device NLL {mean:.4}, MAP eps {:.3}", r.map_epsilon);
    ensure((1.25..=1.45).contains(&mean), || detail.clone())?;
    ensure((0.4..=0.8).contains(&r.map_epsilon), || detail.clone())?;
    Ok(detail)
}

fn switching_regret() -> Check {
    let world = World::default_world();
    let map = world.map();
    let grid = epsilon_grid(50);
    let mut worst_slack = f64::INFINITY;
    for seed in 0..20u64 {
        let goal = Color::ALL[(seed % 4) as usize];
        let eps = [0.0, 0.1, 0.25, 0.5][(seed / 4 % 4) as usize];
        let actions = generate_actions(
            map,
            &Behavior::GoalSeeker {
                goal,
                epsilon: eps,
                seed,
                steps: Some(60),
            },
        )
        .unwrap();
        let traj = replay(map, &actions);
        let table = step_table(map, &traj, world.plans());
        let mut state = SwitchState::new(world.plans().len(), grid.len());
        for steps in &table {
            state.step(steps);
        }
        let nll_switch = -state.log_likelihood();
        let best = grid
            .iter()
            .flat_map(|&e| {
                let table = &table;
                (0..world.plans().len()).map(move |g| table.iter().map(|row| row[g].probability(e).ln()).sum::<f64>())
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let t = traj.len() as f64;
        let bound = (t + 1.0).ln() + 4f64.ln() + 50f64.ln();
        let regret = nll_switch + best;
        ensure(regret <= bound, || format!("seed {seed}: regret {regret:.3} > {bound:.3}"))?;
        worst_slack = worst_slack.min(bound - regret);
    }
    Ok(format!("smallest slack {worst_slack:.3} nats"))
}

fn incremental() -> Check {
    let world = World::default_world();
    let mut worst: f64 = 0.0;
    for scenario in Scenario::ALL {
        for switching in [false, true] {
            let traj = scenario_trajectory(world.map(), scenario, ScenarioParams::default()).unwrap();
            let batch = assess(&world, &traj, AssessConfig::switching(switching)).unwrap();
            let mut tracker = Tracker::new(&world, AssessConfig::switching(switching)).unwrap();
            let mut last = tracker.readout();
            for &a in &traj.actions {
                last = tracker.push(a);
            }
            let diff = (last.posterior_agt - batch.posterior_agt).abs();
            ensure(diff <= 1e-10, || format!("{scenario} switching={switching}: diff {diff:.3e}"))?;
            worst = worst.max(diff);
        }
    }
    // A hand-typed session with a blocked move and a revisit.
    let actions = parse_actions("UUUULLRRDDDDRRRRRR").unwrap();
    let batch = assess(&world, &replay(world.map(), &actions), AssessConfig::default()).unwrap();
    let mut tracker = Tracker::new(&world, AssessConfig::default()).unwrap();
    let last = actions.iter().map(|&a| tracker.push(a)).last().unwrap();
    worst = worst.max((last.posterior_agt - batch.posterior_agt).abs());
    ensure(worst <= 1e-10, || format!("diff {worst:.3e}"))?;
    Ok(format!("largest difference {worst:.2e}"))
}

fn main() {
    let criteria = [
        Criterion { name: "closed form vs quadrature", budget: Duration::from_secs(1), run: quadrature },
        Criterion { name: "device sequential = batch", budget: Duration::from_secs(1), run: device_equivalence },
        Criterion { name: "planner matches BFS", budget: Duration::from_secs(1), run: planner_oracle },
        Criterion { name: "scenario circle", budget: Duration::from_secs(2), run: circle },
        Criterion { name: "scenario magenta", budget: Duration::from_secs(2), run: magenta },
        Criterion { name: "scenario follow-walls", budget: Duration::from_secs(2), run: follow_walls },
        Criterion { name: "scenario epsblue", budget: Duration::from_secs(2), run: epsblue },
        Criterion { name: "switching scenario", budget: Duration::from_secs(5), run: switching },
        Criterion { name: "random behaviour", budget: Duration::from_secs(2), run: random },
        Criterion { name: "switching regret", budget: Duration::from_secs(5), run: switching_regret },
        Criterion { name: "incremental = batch", budget: Duration::from_secs(5), run: incremental },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:<28} {:>9.2?}  {detail}", c.name, elapsed),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:<28} {:>9.2?}  {detail}", c.name, elapsed);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
