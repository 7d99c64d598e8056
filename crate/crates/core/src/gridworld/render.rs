use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Carried, Cell, DoorState, EnvAction, GridState};

pub const LEGEND: &str = "\
# wall   . floor   G goal   @ agent
K key    B box holding a key   b empty box
L locked door   R/Y/U closed red/yellow/blue door   r/y/u open door";

fn glyph(c: Cell) -> char {
    match c {
        Cell::Wall => '#',
        Cell::Floor => '.',
        Cell::Goal => 'G',
        Cell::Key { .. } => 'K',
        Cell::Box { contains: Some(_), .. } => 'B',
        Cell::Box { contains: None, .. } => 'b',
        Cell::Door { state: DoorState::Locked, .. } => 'L',
        Cell::Door { color, state } => {
            let ch = color.name().chars().next().unwrap();
            let ch = if ch == 'b' { 'u' } else { ch };
            if state == DoorState::Open {
                ch
            } else {
                ch.to_ascii_uppercase()
            }
        }
    }
}

/// One character per cell, rows separated by newlines, followed by a status
/// line.
pub fn render(state: &GridState) -> String {
    let mut out = String::with_capacity((state.cols + 1) * (state.rows + 1));
    for r in 0..state.rows {
        for c in 0..state.cols {
            let p = super::Pos::new(r, c);
            out.push(if p == state.agent { '@' } else { glyph(state.cell(p)) });
        }
        out.push('\n');
    }
    let carry = match state.carrying {
        None => "nothing".to_string(),
        Some(Carried::Key(c)) => format!("{} key", c.name()),
        Some(Carried::Box(c)) => format!("{} box", c.name()),
    };
    out.push_str(&format!(
        "step {}/{}  carrying {}  return {:.2}{}\n",
        state.steps,
        state.max_steps,
        carry,
        state.shaped_return(),
        if state.done {
            if state.success {
                "  done"
            } else {
                "  timeout"
            }
        } else {
            ""
        }
    ));
    out
}

/// Short hex digest of the grid, agent and inventory.
pub fn state_hash(state: &GridState) -> String {
    let mut h = Sha256::new();
    for c in &state.cells {
        h.update([glyph(*c) as u8]);
    }
    h.update(format!("{:?}{:?}", state.agent, state.carrying).as_bytes());
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub state_hash: String,
    pub action: EnvAction,
    pub reward: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Task;

    #[test]
    fn render_round_trips_through_ascii() {
        let text = "#######\n#@K.LG#\n#Bb.RU#\n#..ryu#\n#######\n";
        let s = GridState::from_ascii(Task::MultiRoom, text, 10).unwrap();
        let r = render(&s);
        assert!(r.starts_with(text));
    }
}
