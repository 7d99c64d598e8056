//! Deterministic, fully observed gridworlds: DoorKey, BoxKey, UnlockPickup,
//! MultiRoom and the two semantically modified variants.

mod layout;
pub mod nav;
mod planner;
mod render;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use planner::{scripted_plan, solvability_check};
pub use render::{render, state_hash, TrajectoryRecord, LEGEND};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("no solvable layout for {task} n={size} seed={seed} after {attempts} attempts")]
    Generation {
        task: Task,
        size: usize,
        seed: u64,
        attempts: usize,
    },
    #[error("step called on a finished episode")]
    Lifecycle,
    #[error("bad ascii layout: {0}")]
    Ascii(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "doorkey")]
    DoorKey,
    #[serde(rename = "boxkey")]
    BoxKey,
    #[serde(rename = "unlockpickup")]
    UnlockPickup,
    #[serde(rename = "multiroom")]
    MultiRoom,
    #[serde(rename = "boxkey-semmod")]
    BoxKeySemMod,
    #[serde(rename = "unlockpickup-semmod")]
    UnlockPickupSemMod,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::DoorKey,
        Task::BoxKey,
        Task::UnlockPickup,
        Task::MultiRoom,
        Task::BoxKeySemMod,
        Task::UnlockPickupSemMod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::DoorKey => "doorkey",
            Task::BoxKey => "boxkey",
            Task::UnlockPickup => "unlockpickup",
            Task::MultiRoom => "multiroom",
            Task::BoxKeySemMod => "boxkey-semmod",
            Task::UnlockPickupSemMod => "unlockpickup-semmod",
        }
    }

    /// The training task a variant is derived from.
    pub fn base(self) -> Task {
        match self {
            Task::BoxKeySemMod => Task::BoxKey,
            Task::UnlockPickupSemMod => Task::UnlockPickup,
            t => t,
        }
    }

    pub fn sem_mod(self) -> Option<Task> {
        match self.base() {
            Task::BoxKey => Some(Task::BoxKeySemMod),
            Task::UnlockPickup => Some(Task::UnlockPickupSemMod),
            _ => None,
        }
    }

    pub fn boxes_pickable(self) -> bool {
        self.base() == Task::UnlockPickup
    }

    /// Sub-task events that pay the shaping bonus.
    pub fn rewarded(self, ev: Event) -> bool {
        match (self.base(), ev) {
            (Task::DoorKey, Event::KeyPicked | Event::DoorOpened(_)) => true,
            (Task::BoxKey, Event::BoxOpened | Event::KeyPicked | Event::DoorOpened(_)) => true,
            (Task::UnlockPickup, Event::KeyPicked | Event::DoorOpened(_) | Event::KeyDropped) => true,
            (Task::MultiRoom, Event::DoorOpened(_)) => true,
            _ => false,
        }
    }

    /// Grid sizes of the evaluation sweep; the first one is the training size.
    pub fn sweep_sizes(self) -> Vec<usize> {
        match self.base() {
            Task::UnlockPickup => (6..=18).step_by(2).collect(),
            _ => (8..=20).step_by(2).collect(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "doorkey" => Ok(Task::DoorKey),
            "boxkey" => Ok(Task::BoxKey),
            "unlockpickup" => Ok(Task::UnlockPickup),
            "multiroom" => Ok(Task::MultiRoom),
            "boxkeysemmod" => Ok(Task::BoxKeySemMod),
            "unlockpickupsemmod" => Ok(Task::UnlockPickupSemMod),
            _ => Err(format!("unknown task `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Yellow,
    Blue,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Red, Color::Yellow, Color::Blue];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Yellow => "yellow",
            Color::Blue => "blue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DoorState {
    Open,
    Closed,
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Floor,
    Wall,
    Goal,
    Door { color: Color, state: DoorState },
    Key { color: Color },
    /// `contains` is the color of a key inside, if any.
    Box { color: Color, contains: Option<Color> },
}

impl Cell {
    /// Whether the agent may stand here.
    pub fn passable(self) -> bool {
        matches!(
            self,
            Cell::Floor | Cell::Goal | Cell::Door { state: DoorState::Open, .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub fn new(row: usize, col: usize) -> Self {
        Pos { row, col }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// Neighbour in direction `(drow, dcol)`, if it stays non-negative.
    pub fn offset(self, drow: i32, dcol: i32) -> Option<Pos> {
        let r = self.row as i64 + drow as i64;
        let c = self.col as i64 + dcol as i64;
        (r >= 0 && c >= 0).then(|| Pos::new(r as usize, c as usize))
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Scan order for interactions and neighbour enumeration: N, E, S, W.
pub const DIRECTIONS: [(i32, i32); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvAction {
    MoveNorth,
    MoveSouth,
    MoveEast,
    MoveWest,
    Pick,
    Toggle,
    Drop,
    Noop,
}

impl EnvAction {
    pub const ALL: [EnvAction; 8] = [
        EnvAction::MoveNorth,
        EnvAction::MoveSouth,
        EnvAction::MoveEast,
        EnvAction::MoveWest,
        EnvAction::Pick,
        EnvAction::Toggle,
        EnvAction::Drop,
        EnvAction::Noop,
    ];

    pub fn delta(self) -> Option<(i32, i32)> {
        match self {
            EnvAction::MoveNorth => Some((-1, 0)),
            EnvAction::MoveSouth => Some((1, 0)),
            EnvAction::MoveEast => Some((0, 1)),
            EnvAction::MoveWest => Some((0, -1)),
            _ => None,
        }
    }

    pub fn from_delta(drow: i32, dcol: i32) -> Option<EnvAction> {
        match (drow, dcol) {
            (-1, 0) => Some(EnvAction::MoveNorth),
            (1, 0) => Some(EnvAction::MoveSouth),
            (0, 1) => Some(EnvAction::MoveEast),
            (0, -1) => Some(EnvAction::MoveWest),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvAction::MoveNorth => "north",
            EnvAction::MoveSouth => "south",
            EnvAction::MoveEast => "east",
            EnvAction::MoveWest => "west",
            EnvAction::Pick => "pick",
            EnvAction::Toggle => "toggle",
            EnvAction::Drop => "drop",
            EnvAction::Noop => "noop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Carried {
    Key(Color),
    Box(Color),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Event {
    BoxOpened,
    KeyPicked,
    KeyDropped,
    DoorOpened(Color),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub task: Task,
    pub size: usize,
    pub seed: u64,
    /// Defaults to [`default_max_steps`].
    pub max_steps: Option<usize>,
}

/// 4 n^2, except MultiRoom which uses 5 n.
pub fn default_max_steps(task: Task, size: usize) -> usize {
    match task.base() {
        Task::MultiRoom => 5 * size,
        _ => 4 * size * size,
    }
}

impl EnvConfig {
    pub fn new(task: Task, size: usize, seed: u64) -> Self {
        EnvConfig {
            task,
            size,
            seed,
            max_steps: None,
        }
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
            .unwrap_or_else(|| default_max_steps(self.task, self.size))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !self.size.is_multiple_of(2) || !(6..=20).contains(&self.size) {
            return Err(EnvError::Config(format!(
                "size must be even and within 6..=20, got {}",
                self.size
            )));
        }
        if self.max_steps() == 0 {
            return Err(EnvError::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// (rows, cols) of the generated grid.
    pub fn dims(&self) -> (usize, usize) {
        match self.task.base() {
            Task::UnlockPickup => (self.size, 2 * self.size - 1),
            _ => (self.size, self.size),
        }
    }
}

/// Result of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub event: Option<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    pub task: Task,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
    pub agent: Pos,
    pub carrying: Option<Carried>,
    pub steps: usize,
    pub max_steps: usize,
    pub done: bool,
    pub success: bool,
    /// Sub-task events already paid out.
    pub events: Vec<Event>,
    /// Shaped return so far in hundredths.
    pub return_cents: i64,
}

pub fn reset(config: &EnvConfig) -> Result<GridState, EnvError> {
    config.validate()?;
    layout::generate(config)
}

impl GridState {
    pub fn cell(&self, p: Pos) -> Cell {
        self.cells[p.row * self.cols + p.col]
    }

    pub fn set(&mut self, p: Pos, c: Cell) {
        self.cells[p.row * self.cols + p.col] = c;
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.row < self.rows && p.col < self.cols
    }

    pub fn neighbour(&self, p: Pos, d: (i32, i32)) -> Option<Pos> {
        p.offset(d.0, d.1).filter(|q| self.in_bounds(*q))
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| Pos::new(r, c)))
    }

    pub fn find(&self, pred: impl Fn(Cell) -> bool) -> Vec<Pos> {
        self.positions().filter(|p| pred(self.cell(*p))).collect()
    }

    pub fn shaped_return(&self) -> f64 {
        self.return_cents as f64 / 100.0
    }

    /// `1 - 0.9 steps / max_steps` on success, 0 otherwise.
    pub fn normalized_return(&self) -> f64 {
        if self.success {
            1.0 - 0.9 * self.steps as f64 / self.max_steps as f64
        } else {
            0.0
        }
    }

    pub fn has_key(&self) -> bool {
        matches!(self.carrying, Some(Carried::Key(_)))
    }

    /// Counts of (keys incl. carried and boxed, boxes incl. carried, doors, goals).
    pub fn object_counts(&self) -> (usize, usize, usize, usize) {
        let mut k = 0;
        let mut b = 0;
        let mut d = 0;
        let mut g = 0;
        for c in &self.cells {
            match c {
                Cell::Key { .. } => k += 1,
                Cell::Box { contains, .. } => {
                    b += 1;
                    if contains.is_some() {
                        k += 1;
                    }
                }
                Cell::Door { .. } => d += 1,
                Cell::Goal => g += 1,
                _ => {}
            }
        }
        match self.carrying {
            Some(Carried::Key(_)) => k += 1,
            Some(Carried::Box(_)) => b += 1,
            None => {}
        }
        (k, b, d, g)
    }

    /// First cell next to the agent, in N, E, S, W order, satisfying `pred`.
    pub fn first_adjacent(&self, pred: impl Fn(Cell) -> bool) -> Option<Pos> {
        DIRECTIONS
            .iter()
            .filter_map(|d| self.neighbour(self.agent, *d))
            .find(|q| pred(self.cell(*q)))
    }

    pub fn step(&mut self, action: EnvAction) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::Lifecycle);
        }
        self.steps += 1;
        let mut cents: i64 = -1;
        let mut event = None;
        match action {
            EnvAction::MoveNorth | EnvAction::MoveSouth | EnvAction::MoveEast | EnvAction::MoveWest => {
                let d = action.delta().unwrap();
                if let Some(q) = self.neighbour(self.agent, d) {
                    if self.cell(q).passable() {
                        self.agent = q;
                        if self.cell(q) == Cell::Goal && self.task.base() != Task::UnlockPickup {
                            self.success = true;
                        }
                    }
                }
            }
            EnvAction::Pick => {
                if self.carrying.is_none() {
                    let pickable = |c: Cell| match c {
                        Cell::Key { .. } => true,
                        Cell::Box { .. } => self.task.boxes_pickable(),
                        _ => false,
                    };
                    let target = self.first_adjacent(pickable);
                    if let Some(q) = target {
                        match self.cell(q) {
                            Cell::Key { color } => {
                                self.carrying = Some(Carried::Key(color));
                                event = Some(Event::KeyPicked);
                            }
                            Cell::Box { color, .. } => {
                                self.carrying = Some(Carried::Box(color));
                                self.success = true;
                            }
                            _ => unreachable!(),
                        }
                        self.set(q, Cell::Floor);
                    }
                }
            }
            EnvAction::Toggle => {
                let held = match self.carrying {
                    Some(Carried::Key(c)) => Some(c),
                    _ => None,
                };
                let effective = |c: Cell| match c {
                    Cell::Box { .. } => true,
                    Cell::Door { state: DoorState::Closed, .. } => true,
                    Cell::Door { state: DoorState::Locked, color } => held == Some(color),
                    _ => false,
                };
                let target = self.first_adjacent(effective);
                if let Some(q) = target {
                    match self.cell(q) {
                        Cell::Box { contains, .. } => {
                            self.set(
                                q,
                                match contains {
                                    Some(color) => Cell::Key { color },
                                    None => Cell::Floor,
                                },
                            );
                            event = Some(Event::BoxOpened);
                        }
                        Cell::Door { color, .. } => {
                            self.set(
                                q,
                                Cell::Door {
                                    color,
                                    state: DoorState::Open,
                                },
                            );
                            event = Some(Event::DoorOpened(color));
                        }
                        _ => unreachable!(),
                    }
                }
            }
            EnvAction::Drop => {
                if let Some(obj) = self.carrying {
                    let target = self.first_adjacent(|c| c == Cell::Floor);
                    if let Some(q) = target {
                        self.set(
                            q,
                            match obj {
                                Carried::Key(color) => Cell::Key { color },
                                Carried::Box(color) => Cell::Box {
                                    color,
                                    contains: None,
                                },
                            },
                        );
                        self.carrying = None;
                        if matches!(obj, Carried::Key(_)) {
                            event = Some(Event::KeyDropped);
                        }
                    }
                }
            }
            EnvAction::Noop => {}
        }
        if let Some(ev) = event {
            if self.task.rewarded(ev) && !self.events.contains(&ev) {
                self.events.push(ev);
                cents += 20;
            }
        }
        if self.success {
            cents += 100;
            self.done = true;
        } else if self.steps >= self.max_steps {
            self.done = true;
        }
        self.return_cents += cents;
        Ok(StepOutcome {
            reward: cents as f64 / 100.0,
            done: self.done,
            event,
        })
    }

    /// Parses a layout drawn with the [`LEGEND`] characters. Rows are lines;
    /// surrounding whitespace is ignored.
    pub fn from_ascii(task: Task, text: &str, max_steps: usize) -> Result<GridState, EnvError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(EnvError::Ascii("empty layout".into()));
        }
        let cols = lines[0].chars().count();
        let mut cells = Vec::new();
        let mut agent = None;
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(EnvError::Ascii(format!("row {r} has a different width")));
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Floor,
                    'G' => Cell::Goal,
                    '@' => {
                        agent = Some(Pos::new(r, c));
                        Cell::Floor
                    }
                    'K' => Cell::Key { color: Color::Yellow },
                    'B' => Cell::Box {
                        color: Color::Blue,
                        contains: Some(Color::Yellow),
                    },
                    'b' => Cell::Box {
                        color: Color::Blue,
                        contains: None,
                    },
                    'L' => Cell::Door {
                        color: Color::Yellow,
                        state: DoorState::Locked,
                    },
                    'R' | 'Y' | 'U' | 'r' | 'y' | 'u' => {
                        let color = match ch.to_ascii_uppercase() {
                            'R' => Color::Red,
                            'Y' => Color::Yellow,
                            _ => Color::Blue,
                        };
                        let state = if ch.is_ascii_uppercase() {
                            DoorState::Closed
                        } else {
                            DoorState::Open
                        };
                        Cell::Door { color, state }
                    }
                    other => return Err(EnvError::Ascii(format!("unknown cell `{other}`"))),
                };
                cells.push(cell);
            }
        }
        let agent = agent.ok_or_else(|| EnvError::Ascii("no agent `@`".into()))?;
        Ok(GridState {
            task,
            rows: lines.len(),
            cols,
            cells,
            agent,
            carrying: None,
            steps: 0,
            max_steps,
            done: false,
            success: false,
            events: Vec::new(),
            return_cents: 0,
        })
    }
}
