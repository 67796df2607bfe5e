//! In-memory steering sessions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use agency_core::gridworld::{CellKind, Color, Pos};
use agency_core::verdict::{assess_actions, by_color, AssessConfig, StepReadout, Tracker, VerdictError, VerdictReport, World};
use agency_core::Action;
use serde::{Deserialize, Serialize};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

/// Wire form of one step's readout. Goal posteriors are in the fixed order
/// red, green, blue, magenta; balloons missing from the map read 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub t: usize,
    pub position: Pos,
    pub last_action: Option<Action>,
    pub observation: CellKind,
    pub nll_dev: f64,
    pub nll_agt: f64,
    pub posterior_agt: f64,
    pub posterior_dev: f64,
    pub goal_posteriors: [f64; 4],
}

impl StepResult {
    fn from_readout(r: StepReadout, colors: &[Color]) -> Self {
        StepResult {
            t: r.t,
            position: r.position,
            last_action: r.last_action,
            observation: r.observation,
            nll_dev: r.nll_dev,
            nll_agt: r.nll_agt,
            posterior_agt: r.posterior_agt,
            posterior_dev: r.posterior_dev,
            goal_posteriors: by_color(colors, &r.goal_posteriors),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalCell {
    pub color: Color,
    pub position: Pos,
}

/// Everything a client needs to draw the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    /// One string per row in map syntax, without the start marker.
    pub cells: Vec<String>,
    pub start: Pos,
    pub goals: Vec<GoalCell>,
    pub switching: bool,
    pub gamma: f64,
    pub epsilon_points: usize,
    pub state: StepResult,
}

/// One steering session: a world and the incremental scorer over the
/// actions taken so far.
pub struct Session {
    id: String,
    world: Arc<World>,
    tracker: Tracker<Arc<World>>,
    last_used: Instant,
}

impl Session {
    pub fn new(id: String, world: Arc<World>, config: AssessConfig) -> Result<Self, VerdictError> {
        let tracker = Tracker::new(Arc::clone(&world), config)?;
        Ok(Session {
            id,
            world,
            tracker,
            last_used: Instant::now(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.tracker.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracker.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        self.tracker.actions()
    }

    fn touch(&mut self) {
        self.last_used = Instant::now();
    }

    pub fn state(&self) -> StepResult {
        StepResult::from_readout(self.tracker.readout(), &self.world.colors())
    }

    pub fn descriptor(&self) -> SessionDescriptor {
        let map = self.world.map();
        let config = self.tracker.config();
        SessionDescriptor {
            id: self.id.clone(),
            rows: map.rows(),
            cols: map.cols(),
            cells: map.cell_rows(),
            start: map.start(),
            goals: map
                .goals()
                .iter()
                .map(|&(color, position)| GoalCell { color, position })
                .collect(),
            switching: config.switching,
            gamma: self.world.gamma(),
            epsilon_points: config.epsilon_points,
            state: self.state(),
        }
    }

    pub fn step(&mut self, action: Action) -> StepResult {
        self.touch();
        let r = self.tracker.push(action);
        StepResult::from_readout(r, &self.world.colors())
    }

    /// Drops the last action by rescoring the remaining prefix. `None` when
    /// there is nothing to undo.
    pub fn undo(&mut self) -> Option<StepResult> {
        self.touch();
        let (_, prefix) = self.tracker.actions().split_last()?;
        let prefix = prefix.to_vec();
        self.rebuild(&prefix);
        Some(self.state())
    }

    pub fn reset(&mut self) -> StepResult {
        self.touch();
        self.rebuild(&[]);
        self.state()
    }

    fn rebuild(&mut self, actions: &[Action]) {
        let mut tracker = Tracker::new(Arc::clone(&self.world), self.tracker.config()).expect("config was valid at creation");
        for &a in actions {
            tracker.push(a);
        }
        self.tracker = tracker;
    }

    pub fn report(&mut self) -> Result<VerdictReport, VerdictError> {
        self.touch();
        assess_actions(&self.world, self.tracker.actions(), self.tracker.config())
    }
}

/// Session table. Each session sits behind its own lock so requests to one
/// session are serialized while distinct sessions proceed independently.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    idle_timeout: Duration,
}

impl SessionStore {
    pub fn new(idle_timeout: Duration) -> Self {
        SessionStore {
            sessions: Mutex::new(HashMap::new()),
            idle_timeout,
        }
    }

    pub fn insert(&self, session: Session) -> Arc<Mutex<Session>> {
        let id = session.id.clone();
        let entry = Arc::new(Mutex::new(session));
        self.sessions.lock().unwrap().insert(id, Arc::clone(&entry));
        entry
    }

    /// Looks a session up, treating idle ones as gone.
    pub fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        let mut sessions = self.sessions.lock().unwrap();
        let entry = Arc::clone(sessions.get(id)?);
        let expired = entry
            .try_lock()
            .map(|s| s.last_used.elapsed() > self.idle_timeout)
            .unwrap_or(false);
        if expired {
            sessions.remove(id);
            return None;
        }
        Some(entry)
    }

    pub fn remove(&self, id: &str) -> bool {
        self.sessions.lock().unwrap().remove(id).is_some()
    }

    /// Drops every session idle for longer than the timeout; returns how many.
    pub fn expire_idle(&self) -> usize {
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| {
            s.try_lock()
                .map(|s| s.last_used.elapsed() <= self.idle_timeout)
                .unwrap_or(true)
        });
        before - sessions.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
