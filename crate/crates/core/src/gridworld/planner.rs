//! Scripted breadth-first solver used to validate generated layouts.

use super::nav::{approach_cells, next_waypoint, reachable_mask};
use super::{Carried, Cell, DoorState, EnvAction, GridState, Pos, Task, DIRECTIONS};

enum Target {
    Stand(Pos),
    Adjacent(Pos, EnvAction),
    DropHere,
}

fn nearest(state: &GridState, pred: impl Fn(Cell) -> bool) -> Option<Pos> {
    state
        .find(pred)
        .into_iter()
        .min_by_key(|p| (p.manhattan(state.agent), p.row, p.col))
}

fn next_target(s: &GridState) -> Option<Target> {
    let key = || nearest(s, |c| matches!(c, Cell::Key { .. }));
    let locked = || nearest(s, |c| matches!(c, Cell::Door { state: DoorState::Locked, .. }));
    match s.task.base() {
        Task::DoorKey | Task::BoxKey => {
            if let Some(d) = locked() {
                if s.has_key() {
                    return Some(Target::Adjacent(d, EnvAction::Toggle));
                }
                if let Some(k) = key() {
                    return Some(Target::Adjacent(k, EnvAction::Pick));
                }
                let b = nearest(s, |c| matches!(c, Cell::Box { contains: Some(_), .. }))?;
                return Some(Target::Adjacent(b, EnvAction::Toggle));
            }
            nearest(s, |c| c == Cell::Goal).map(Target::Stand)
        }
        Task::UnlockPickup => {
            if let Some(d) = locked() {
                if s.has_key() {
                    return Some(Target::Adjacent(d, EnvAction::Toggle));
                }
                return key().map(|k| Target::Adjacent(k, EnvAction::Pick));
            }
            if matches!(s.carrying, Some(Carried::Key(_))) {
                return Some(Target::DropHere);
            }
            nearest(s, |c| matches!(c, Cell::Box { .. })).map(|b| Target::Adjacent(b, EnvAction::Pick))
        }
        Task::MultiRoom => {
            let reach = reachable_mask(s);
            let touches = |p: Pos| {
                DIRECTIONS
                    .iter()
                    .filter_map(|d| s.neighbour(p, *d))
                    .any(|q| reach[q.row * s.cols + q.col])
            };
            if let Some(g) = nearest(s, |c| c == Cell::Goal).filter(|g| reach[g.row * s.cols + g.col]) {
                return Some(Target::Stand(g));
            }
            s.find(|c| matches!(c, Cell::Door { state: DoorState::Closed, .. }))
                .into_iter()
                .find(|d| touches(*d))
                .map(|d| Target::Adjacent(d, EnvAction::Toggle))
        }
        _ => unreachable!("base task"),
    }
}

/// Actions of the scripted solution, or `None` if it gets stuck or runs
/// out of steps.
pub fn scripted_plan(state: &GridState) -> Option<Vec<EnvAction>> {
    let mut s = state.clone();
    let mut plan = Vec::new();
    while !s.done {
        let target = next_target(&s)?;
        let (arrivals, act) = match target {
            Target::Stand(p) => (vec![p], None),
            Target::Adjacent(p, a) => (approach_cells(&s, p), Some(a)),
            Target::DropHere => (vec![s.agent], Some(EnvAction::Drop)),
        };
        let (way, dist) = next_waypoint(&s, &arrivals)?;
        let action = if dist == 0 {
            act?
        } else {
            EnvAction::from_delta(
                way.row as i32 - s.agent.row as i32,
                way.col as i32 - s.agent.col as i32,
            )?
        };
        let before = (s.cells.clone(), s.agent, s.carrying);
        s.step(action).ok()?;
        plan.push(action);
        if dist == 0 && (s.cells.clone(), s.agent, s.carrying) == before && !s.done {
            return None;
        }
    }
    s.success.then_some(plan)
}

pub fn solvability_check(state: &GridState) -> bool {
    scripted_plan(state).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walled_off_goal_is_unsolvable() {
        let s = GridState::from_ascii(
            Task::DoorKey,
            "
            ######
            #@K#G#
            #..###
            ######
            ",
            100,
        )
        .unwrap();
        assert!(!solvability_check(&s));
    }

    #[test]
    fn simple_layout_is_solvable() {
        let s = GridState::from_ascii(
            Task::DoorKey,
            "
            ######
            #@K#.#
            #..LG#
            ######
            ",
            100,
        )
        .unwrap();
        let plan = scripted_plan(&s).unwrap();
        assert_eq!(plan.len(), 6);
    }
}
