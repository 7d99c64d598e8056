//! Encoders from grid states to per-hole valuations, subgoal resolution and
//! decoding of deduced head values into decisions.

mod vocab;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::entropy;
use crate::gridworld::nav::{approach_cells, next_waypoint, reachable_mask};
use crate::gridworld::{Cell, Color, DoorState, EnvAction, GridState, Pos};
use crate::hole::Hole;
use crate::logic::{GroundAtom, ValuationVector};

pub use vocab::{door_constant, HoleVocabulary, TaskVocabulary, GUARDS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot resolve {subgoal}: {reason}")]
pub struct ResolutionError {
    pub subgoal: Subgoal,
    pub reason: String,
}

/// A WHERE decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subgoal {
    Key,
    Door,
    Box,
    Goal,
    ColoredDoor(Color),
    DropKey,
}

impl Subgoal {
    pub fn head_name(self) -> String {
        match self {
            Subgoal::Key => "gt_key".into(),
            Subgoal::Door => "gt_door".into(),
            Subgoal::Box => "gt_box".into(),
            Subgoal::Goal => "gt_goal".into(),
            Subgoal::ColoredDoor(c) => format!("gt_{}", c.name()),
            Subgoal::DropKey => "drop_key".into(),
        }
    }

    pub fn from_head(head: &GroundAtom) -> Option<Subgoal> {
        if head.arity() != 0 {
            return None;
        }
        Some(match head.predicate.as_str() {
            "gt_key" => Subgoal::Key,
            "gt_door" => Subgoal::Door,
            "gt_box" => Subgoal::Box,
            "gt_goal" => Subgoal::Goal,
            "drop_key" => Subgoal::DropKey,
            "gt_red" => Subgoal::ColoredDoor(Color::Red),
            "gt_yellow" => Subgoal::ColoredDoor(Color::Yellow),
            "gt_blue" => Subgoal::ColoredDoor(Color::Blue),
            _ => return None,
        })
    }
}

impl fmt::Display for Subgoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.head_name())
    }
}

/// Object class named by the `at(_)` atoms of the WHAT hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjClass {
    Key,
    Door,
    Box,
    Goal,
    Empty,
    ColoredDoor(Color),
}

impl ObjClass {
    pub fn constant(self) -> String {
        match self {
            ObjClass::Key => "key".into(),
            ObjClass::Door => "door".into(),
            ObjClass::Box => "box".into(),
            ObjClass::Goal => "goal".into(),
            ObjClass::Empty => "empty".into(),
            ObjClass::ColoredDoor(c) => door_constant(c),
        }
    }
}

/// Where a subgoal is and how to get there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalBinding {
    pub subgoal: Subgoal,
    pub class: ObjClass,
    pub target: Pos,
    /// Next cell on a shortest path, or the agent's own cell on arrival.
    pub waypoint: Pos,
    /// `(d_row, d_col)` from the agent to the waypoint.
    pub offset: (i32, i32),
    /// Path length to the nearest arrival cell.
    pub distance: u32,
}

impl SubgoalBinding {
    pub fn arrived(&self) -> bool {
        self.offset == (0, 0)
    }
}

fn nearest(state: &GridState, pred: impl Fn(Cell) -> bool) -> Option<Pos> {
    state
        .find(pred)
        .into_iter()
        .min_by_key(|p| (p.manhattan(state.agent), p.row, p.col))
}

/// Picks the nearest object for `subgoal` (Manhattan distance, then row,
/// then column) and the next breadth-first waypoint toward it. Closed and
/// locked doors block the path; object targets are approached from an
/// adjacent cell, the goal is stood on, and `drop_key` resolves to the
/// agent's own cell next to a free floor cell.
pub fn resolve_subgoal(state: &GridState, subgoal: Subgoal) -> Result<SubgoalBinding, ResolutionError> {
    let err = |reason: &str| ResolutionError {
        subgoal,
        reason: reason.to_string(),
    };
    let (class, target, arrivals) = match subgoal {
        Subgoal::DropKey => {
            let free = state
                .first_adjacent(|c| c == Cell::Floor)
                .ok_or_else(|| err("no free cell next to the agent"))?;
            (ObjClass::Empty, free, vec![state.agent])
        }
        Subgoal::Goal => {
            let g = nearest(state, |c| c == Cell::Goal).ok_or_else(|| err("no goal"))?;
            (ObjClass::Goal, g, vec![g])
        }
        _ => {
            let (class, found) = match subgoal {
                Subgoal::Key => (ObjClass::Key, nearest(state, |c| matches!(c, Cell::Key { .. }))),
                Subgoal::Door => (ObjClass::Door, nearest(state, |c| matches!(c, Cell::Door { .. }))),
                Subgoal::Box => (ObjClass::Box, nearest(state, |c| matches!(c, Cell::Box { .. }))),
                Subgoal::ColoredDoor(col) => (
                    ObjClass::ColoredDoor(col),
                    nearest(state, |c| matches!(c, Cell::Door { color, .. } if color == col)),
                ),
                _ => unreachable!(),
            };
            let t = found.ok_or_else(|| err("no such object"))?;
            (class, t, approach_cells(state, t))
        }
    };
    let (waypoint, distance) = next_waypoint(state, &arrivals).ok_or_else(|| err("unreachable"))?;
    Ok(SubgoalBinding {
        subgoal,
        class,
        target,
        waypoint,
        offset: (
            waypoint.row as i32 - state.agent.row as i32,
            waypoint.col as i32 - state.agent.col as i32,
        ),
        distance,
    })
}

fn door_open(state: &GridState, color: Option<Color>) -> bool {
    state
        .find(|c| match c {
            Cell::Door { color: dc, state } => {
                state == DoorState::Open && color.is_none_or(|col| col == dc)
            }
            _ => false,
        })
        .into_iter()
        .next()
        .is_some()
}

/// Truth of one WHERE-level fact on `state`, or `None` for atoms that are
/// not state facts.
fn state_fact(state: &GridState, atom: &GroundAtom, reach: &mut Option<Vec<bool>>) -> Option<bool> {
    let term = atom.terms.first().map(String::as_str)?;
    let color_of = |t: &str| Color::ALL.into_iter().find(|c| door_constant(*c) == t);
    Some(match (atom.predicate.as_str(), term) {
        ("has_key", "agent") => state.has_key(),
        ("has_key", "env") => !state.find(|c| matches!(c, Cell::Key { .. })).is_empty(),
        ("is_open", "door") => door_open(state, None),
        ("is_open", t) => door_open(state, Some(color_of(t)?)),
        ("reachable", t) => {
            let mask = reach.get_or_insert_with(|| reachable_mask(state));
            let inside = |p: Pos| mask[p.row * state.cols + p.col];
            if t == "goal" {
                state.find(|c| c == Cell::Goal).into_iter().any(inside)
            } else {
                let col = color_of(t)?;
                state
                    .find(|c| matches!(c, Cell::Door { color, .. } if color == col))
                    .into_iter()
                    .any(|d| {
                        crate::gridworld::DIRECTIONS
                            .iter()
                            .filter_map(|dir| state.neighbour(d, *dir))
                            .any(inside)
                    })
            }
        }
        _ => return None,
    })
}

/// Object-state and agent-attribute facts over the WHERE base.
pub fn encode_where(state: &GridState, vocab: &HoleVocabulary) -> ValuationVector {
    encode_with(vocab, |a, reach| state_fact(state, a, reach).unwrap_or(false))
}

/// Sign predicates of the waypoint offset; `x` is the row axis (south is
/// positive) and `y` the column axis (east is positive).
pub fn encode_how(binding: &SubgoalBinding, vocab: &HoleVocabulary) -> ValuationVector {
    let sign = |v: i32| match v.signum() {
        1 => "pos",
        -1 => "neg",
        _ => "zero",
    };
    let (dx, dy) = binding.offset;
    encode_with(vocab, |a, _| match a.terms.first().map(String::as_str) {
        Some("x") => a.predicate == sign(dx),
        Some("y") => a.predicate == sign(dy),
        _ => false,
    })
}

/// WHERE facts plus `at(c)`, true for the class of the subgoal the agent
/// has arrived at.
pub fn encode_what(state: &GridState, binding: Option<&SubgoalBinding>, vocab: &HoleVocabulary) -> ValuationVector {
    let here = binding.filter(|b| b.arrived()).map(|b| b.class.constant());
    encode_with(vocab, |a, reach| {
        if a.predicate == "at" {
            here.as_deref() == a.terms.first().map(String::as_str)
        } else {
            state_fact(state, a, reach).unwrap_or(false)
        }
    })
}

fn encode_with(
    vocab: &HoleVocabulary,
    mut fact: impl FnMut(&GroundAtom, &mut Option<Vec<bool>>) -> bool,
) -> ValuationVector {
    let mut reach = None;
    let mut v = ValuationVector::zeros(vocab.base.len());
    for i in vocab.base.extensional_indices() {
        if fact(vocab.base.atom(i), &mut reach) {
            v.0[i] = 1.0;
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sample,
    #[default]
    Argmax,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample" => Ok(Mode::Sample),
            "argmax" => Ok(Mode::Argmax),
            _ => Err(format!("unknown mode `{s}` (expected sample or argmax)")),
        }
    }
}

/// A categorical choice over head values.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub index: usize,
    pub probs: Vec<f64>,
    pub log_prob: f64,
    pub entropy: f64,
}

/// Normalizes `values` into a distribution and picks an index: the first
/// maximum in argmax mode, an inverse-CDF draw in sample mode (exactly one
/// uniform draw per call). Returns `None` when every value is zero, which
/// callers treat as a fallback.
pub fn decode(values: &[f64], mode: Mode, rng: &mut impl Rng) -> Option<Decision> {
    let total: f64 = values.iter().sum();
    if values.is_empty() || !(total > 0.0) {
        if mode == Mode::Sample {
            let _: f64 = rng.random();
        }
        return None;
    }
    let probs: Vec<f64> = values.iter().map(|v| v / total).collect();
    let index = match mode {
        Mode::Argmax => {
            let mut best = 0;
            for (i, &v) in values.iter().enumerate() {
                if v > values[best] {
                    best = i;
                }
            }
            best
        }
        Mode::Sample => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = None;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if *p > 0.0 && u < acc {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| probs.iter().rposition(|p| *p > 0.0).unwrap())
        }
    };
    Some(Decision {
        index,
        log_prob: probs[index].ln(),
        entropy: entropy(&probs),
        probs,
    })
}

/// What a chosen head means for the sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMeaning {
    Subgoal(Subgoal),
    Action(EnvAction),
}

/// Maps a head atom of `hole` to its subgoal or action.
pub fn head_meaning(hole: Hole, head: &GroundAtom) -> Option<HeadMeaning> {
    match hole {
        Hole::Where => Subgoal::from_head(head).map(HeadMeaning::Subgoal),
        Hole::How => Some(HeadMeaning::Action(match head.predicate.as_str() {
            "go_north" => EnvAction::MoveNorth,
            "go_south" => EnvAction::MoveSouth,
            "go_east" => EnvAction::MoveEast,
            "go_west" => EnvAction::MoveWest,
            _ => return None,
        })),
        Hole::What => Some(HeadMeaning::Action(match head.predicate.as_str() {
            "pick" => EnvAction::Pick,
            "toggle" => EnvAction::Toggle,
            "drop" => EnvAction::Drop,
            "noop" => EnvAction::Noop,
            _ => return None,
        })),
    }
}
