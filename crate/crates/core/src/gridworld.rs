//! Deterministic grid environment.
//!
//! A map is a rectangle of cells enclosed by walls. The system occupies one
//! non-wall cell and moves in four directions; a move into a wall leaves it in
//! place. After each move the system observes the kind of the cell it faces,
//! i.e. the neighbour in the direction of the move it just attempted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Map shipped with the crate, used by scenarios and as the service default.
pub const DEFAULT_MAP: &str = include_str!("../maps/default.txt");

/// Number of actions available to the system.
pub const NUM_ACTIONS: usize = 4;

/// Number of distinct cell kinds a system can observe.
pub const NUM_CELL_KINDS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// `(row, col)` displacement.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Action::Up => 'U',
            Action::Down => 'D',
            Action::Left => 'L',
            Action::Right => 'R',
        }
    }

    pub fn from_letter(c: char) -> Option<Action> {
        match c.to_ascii_uppercase() {
            'U' => Some(Action::Up),
            'D' => Some(Action::Down),
            'L' => Some(Action::Left),
            'R' => Some(Action::Right),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid action character {found:?} at position {index}; expected one of U, D, L, R")]
pub struct ActionParseError {
    pub found: char,
    pub index: usize,
}

/// Parses an action string over the alphabet `U`, `D`, `L`, `R`.
///
/// Whitespace is ignored so that long strings can be wrapped in files.
pub fn parse_actions(s: &str) -> Result<Vec<Action>, ActionParseError> {
    s.chars()
        .enumerate()
        .filter(|(_, c)| !c.is_whitespace())
        .map(|(index, c)| Action::from_letter(c).ok_or(ActionParseError { found: c, index }))
        .collect()
}

pub fn format_actions(actions: &[Action]) -> String {
    actions.iter().map(|a| a.letter()).collect()
}

/// Balloon colours, which double as the goals of the agent hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Blue,
    Magenta,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Red, Color::Green, Color::Blue, Color::Magenta];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Color::Red => 'R',
            Color::Green => 'G',
            Color::Blue => 'B',
            Color::Magenta => 'M',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Magenta => "magenta",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Color {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "red" | "r" => Ok(Color::Red),
            "green" | "g" => Ok(Color::Green),
            "blue" | "b" => Ok(Color::Blue),
            "magenta" | "m" => Ok(Color::Magenta),
            _ => Err(format!("unknown balloon colour {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Wall,
    Empty,
    Red,
    Green,
    Blue,
    Magenta,
}

impl CellKind {
    pub const ALL: [CellKind; NUM_CELL_KINDS] = [
        CellKind::Wall,
        CellKind::Empty,
        CellKind::Red,
        CellKind::Green,
        CellKind::Blue,
        CellKind::Magenta,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn balloon(self) -> Option<Color> {
        match self {
            CellKind::Red => Some(Color::Red),
            CellKind::Green => Some(Color::Green),
            CellKind::Blue => Some(Color::Blue),
            CellKind::Magenta => Some(Color::Magenta),
            CellKind::Wall | CellKind::Empty => None,
        }
    }

    pub fn is_wall(self) -> bool {
        self == CellKind::Wall
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Wall => "wall",
            CellKind::Empty => "empty",
            CellKind::Red => "red",
            CellKind::Green => "green",
            CellKind::Blue => "blue",
            CellKind::Magenta => "magenta",
        }
    }

    fn symbol(self) -> char {
        match self {
            CellKind::Wall => '#',
            CellKind::Empty => '.',
            CellKind::Red => 'R',
            CellKind::Green => 'G',
            CellKind::Blue => 'B',
            CellKind::Magenta => 'M',
        }
    }
}

impl From<Color> for CellKind {
    fn from(c: Color) -> Self {
        match c {
            Color::Red => CellKind::Red,
            Color::Green => CellKind::Green,
            Color::Blue => CellKind::Blue,
            Color::Magenta => CellKind::Magenta,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(row, col)` cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Pos { row, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("map has no start marker 'A'")]
    MissingStart,
    #[error("second start marker 'A' at {second} (first at {first})")]
    DuplicateStart { first: Pos, second: Pos },
    #[error("balloon {color} appears twice ({first} and {second})")]
    DuplicateBalloon { color: Color, first: Pos, second: Pos },
    #[error("border cell {pos} is not a wall")]
    OpenBorder { pos: Pos },
    #[error("unknown character {found:?} at {pos}")]
    UnknownChar { found: char, pos: Pos },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    cells: Vec<CellKind>,
    start: Pos,
    goals: Vec<(Color, Pos)>,
}

impl GridMap {
    /// Parses a map from rows of `#` (wall), `.` (empty), `R`/`G`/`B`/`M`
    /// (balloons) and a single `A` marking the start cell.
    pub fn parse(text: &str) -> Result<GridMap, MapError> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .collect();
        // Tolerate trailing blank lines from editors.
        let end = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
        let lines = &lines[..end];
        if lines.is_empty() || lines[0].is_empty() {
            return Err(MapError::Empty);
        }
        let cols = lines[0].chars().count();
        let rows = lines.len();
        let mut cells = Vec::with_capacity(rows * cols);
        let mut start: Option<Pos> = None;
        let mut seen: [Option<Pos>; 4] = [None; 4];

        for (row, line) in lines.iter().enumerate() {
            let found = line.chars().count();
            if found != cols {
                return Err(MapError::RaggedRows {
                    row,
                    expected: cols,
                    found,
                });
            }
            for (col, ch) in line.chars().enumerate() {
                let pos = Pos::new(row, col);
                let kind = match ch {
                    '#' => CellKind::Wall,
                    '.' => CellKind::Empty,
                    'R' => CellKind::Red,
                    'G' => CellKind::Green,
                    'B' => CellKind::Blue,
                    'M' => CellKind::Magenta,
                    'A' => {
                        if let Some(first) = start {
                            return Err(MapError::DuplicateStart { first, second: pos });
                        }
                        start = Some(pos);
                        CellKind::Empty
                    }
                    other => return Err(MapError::UnknownChar { found: other, pos }),
                };
                if let Some(color) = kind.balloon() {
                    if let Some(first) = seen[color.index()] {
                        return Err(MapError::DuplicateBalloon {
                            color,
                            first,
                            second: pos,
                        });
                    }
                    seen[color.index()] = Some(pos);
                }
                let border = row == 0 || col == 0 || row + 1 == rows || col + 1 == cols;
                if border && kind != CellKind::Wall {
                    return Err(MapError::OpenBorder { pos });
                }
                cells.push(kind);
            }
        }

        let start = start.ok_or(MapError::MissingStart)?;
        let goals = Color::ALL
            .iter()
            .filter_map(|&c| seen[c.index()].map(|p| (c, p)))
            .collect();
        Ok(GridMap {
            rows,
            cols,
            cells,
            start,
            goals,
        })
    }

    pub fn default_map() -> GridMap {
        GridMap::parse(DEFAULT_MAP).expect("shipped map is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn start(&self) -> Pos {
        self.start
    }

    /// Balloons present in the map, in `Color::ALL` order.
    pub fn goals(&self) -> &[(Color, Pos)] {
        &self.goals
    }

    pub fn goal(&self, color: Color) -> Option<Pos> {
        self.goals.iter().find(|(c, _)| *c == color).map(|&(_, p)| p)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn index_of(&self, p: Pos) -> usize {
        p.row * self.cols + p.col
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        Pos::new(index / self.cols, index % self.cols)
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.row < self.rows && p.col < self.cols
    }

    pub fn cell(&self, p: Pos) -> CellKind {
        self.cells[self.index_of(p)]
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.cell(p).is_wall()
    }

    /// All non-wall cells in row-major order.
    pub fn open_cells(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.cells.len())
            .filter(|&i| !self.cells[i].is_wall())
            .map(|i| self.pos_of(i))
    }

    /// Neighbour of `p` in direction `a`. Callers only pass non-wall cells,
    /// which the wall border keeps away from the edge.
    pub fn neighbor(&self, p: Pos, a: Action) -> Pos {
        let (dr, dc) = a.delta();
        Pos::new(
            p.row.checked_add_signed(dr).expect("border wall"),
            p.col.checked_add_signed(dc).expect("border wall"),
        )
    }

    /// Kind of the cell the system faces after having moved with `last_action`.
    pub fn observe(&self, pos: Pos, last_action: Action) -> CellKind {
        self.cell(self.neighbor(pos, last_action))
    }

    /// Deterministic transition: blocked moves leave the system in place.
    /// Balloon cells are passable.
    pub fn step(&self, pos: Pos, action: Action) -> Pos {
        let next = self.neighbor(pos, action);
        if self.is_wall(next) {
            pos
        } else {
            next
        }
    }

    /// Renders the map back to its textual form, including the start marker.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for row in 0..self.rows {
            for col in 0..self.cols {
                let p = Pos::new(row, col);
                out.push(if p == self.start {
                    'A'
                } else {
                    self.cell(p).symbol()
                });
            }
            out.push('\n');
        }
        out
    }

    /// Rows rendered without the start marker.
    pub fn cell_rows(&self) -> Vec<String> {
        (0..self.rows)
            .map(|row| {
                (0..self.cols)
                    .map(|col| self.cell(Pos::new(row, col)).symbol())
                    .collect()
            })
            .collect()
    }
}

impl FromStr for GridMap {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GridMap::parse(s)
    }
}

/// Initial "last action" used to define the context of the first step.
pub const INITIAL_LAST_ACTION: Action = Action::Up;

/// A replayed action sequence.
///
/// `positions[t]` is the cell after `t` actions, and `observations[t - 1]` is
/// the cell faced after action `t`. The context for predicting action `t + 1`
/// is `(observations[t - 1], actions[t - 1])`; for the first action it is
/// `(initial_observation, INITIAL_LAST_ACTION)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub start: Pos,
    pub actions: Vec<Action>,
    pub positions: Vec<Pos>,
    pub initial_observation: CellKind,
    pub observations: Vec<CellKind>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// `(faced cell, last action)` pairs in force before each action.
    pub fn contexts(&self) -> impl Iterator<Item = (CellKind, Action)> + '_ {
        std::iter::once((self.initial_observation, INITIAL_LAST_ACTION)).chain(
            self.observations
                .iter()
                .copied()
                .zip(self.actions.iter().copied()),
        )
        .take(self.actions.len())
    }

    pub fn end(&self) -> Pos {
        *self.positions.last().expect("positions holds the start")
    }

    pub fn action_string(&self) -> String {
        format_actions(&self.actions)
    }
}

/// Replays `actions` from the map's start cell.
pub fn replay(map: &GridMap, actions: &[Action]) -> Trajectory {
    replay_from(map, map.start(), actions)
}

pub fn replay_from(map: &GridMap, start: Pos, actions: &[Action]) -> Trajectory {
    let mut positions = Vec::with_capacity(actions.len() + 1);
    let mut observations = Vec::with_capacity(actions.len());
    let mut pos = start;
    positions.push(pos);
    for &a in actions {
        pos = map.step(pos, a);
        positions.push(pos);
        observations.push(map.observe(pos, a));
    }
    Trajectory {
        start,
        actions: actions.to_vec(),
        positions,
        initial_observation: map.observe(start, INITIAL_LAST_ACTION),
        observations,
    }
}
