//! Breadth-first navigation over passable cells.

use std::collections::VecDeque;

use super::{GridState, Pos, DIRECTIONS};

pub const UNREACHABLE: u32 = u32::MAX;

/// Multi-source BFS distances over passable cells. Sources that are not
/// passable are skipped.
pub fn distance_field(state: &GridState, sources: &[Pos]) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; state.rows * state.cols];
    let mut queue = VecDeque::new();
    for &s in sources {
        let i = s.row * state.cols + s.col;
        if state.cell(s).passable() && dist[i] == UNREACHABLE {
            dist[i] = 0;
            queue.push_back(s);
        }
    }
    while let Some(p) = queue.pop_front() {
        let d = dist[p.row * state.cols + p.col];
        for dir in DIRECTIONS {
            if let Some(q) = state.neighbour(p, dir) {
                let j = q.row * state.cols + q.col;
                if dist[j] == UNREACHABLE && state.cell(q).passable() {
                    dist[j] = d + 1;
                    queue.push_back(q);
                }
            }
        }
    }
    dist
}

/// Passable cells next to `target`, in N, E, S, W order.
pub fn approach_cells(state: &GridState, target: Pos) -> Vec<Pos> {
    DIRECTIONS
        .iter()
        .filter_map(|d| state.neighbour(target, *d))
        .filter(|q| state.cell(*q).passable())
        .collect()
}

/// Cells reachable from the agent, as a mask.
pub fn reachable_mask(state: &GridState) -> Vec<bool> {
    distance_field(state, &[state.agent])
        .into_iter()
        .map(|d| d != UNREACHABLE)
        .collect()
}

/// Next cell toward the nearest of `arrivals` along a shortest path, or
/// `None` when unreachable. Returns the agent's own cell when it is already
/// on an arrival cell. Ties between neighbours break in N, E, S, W order.
pub fn next_waypoint(state: &GridState, arrivals: &[Pos]) -> Option<(Pos, u32)> {
    let dist = distance_field(state, arrivals);
    let here = dist[state.agent.row * state.cols + state.agent.col];
    if here == UNREACHABLE {
        return None;
    }
    if here == 0 {
        return Some((state.agent, 0));
    }
    DIRECTIONS
        .iter()
        .filter_map(|d| state.neighbour(state.agent, *d))
        .find(|q| dist[q.row * state.cols + q.col] == here - 1)
        .map(|q| (q, here))
}
