use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{solvability_check, Cell, Color, DoorState, EnvConfig, EnvError, GridState, Pos, Task};

const MAX_ATTEMPTS: usize = 64;

fn walled(rows: usize, cols: usize) -> Vec<Cell> {
    let mut cells = vec![Cell::Floor; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            if r == 0 || c == 0 || r == rows - 1 || c == cols - 1 {
                cells[r * cols + c] = Cell::Wall;
            }
        }
    }
    cells
}

struct Builder {
    state: GridState,
}

impl Builder {
    fn new(config: &EnvConfig) -> Self {
        let (rows, cols) = config.dims();
        Builder {
            state: GridState {
                task: config.task,
                rows,
                cols,
                cells: walled(rows, cols),
                agent: Pos::new(1, 1),
                carrying: None,
                steps: 0,
                max_steps: config.max_steps(),
                done: false,
                success: false,
                events: Vec::new(),
                return_cents: 0,
            },
        }
    }

    fn vwall(&mut self, col: usize, rows: std::ops::RangeInclusive<usize>) {
        for r in rows {
            self.state.set(Pos::new(r, col), Cell::Wall);
        }
    }

    fn hwall(&mut self, row: usize, cols: std::ops::RangeInclusive<usize>) {
        for c in cols {
            self.state.set(Pos::new(row, c), Cell::Wall);
        }
    }

    /// A uniformly drawn free floor cell in the rectangle, not the agent's.
    fn free_cell(
        &self,
        rng: &mut ChaCha8Rng,
        rows: std::ops::RangeInclusive<usize>,
        cols: std::ops::RangeInclusive<usize>,
        avoid_agent: bool,
    ) -> Option<Pos> {
        let mut free = Vec::new();
        for r in rows {
            for c in cols.clone() {
                let p = Pos::new(r, c);
                if self.state.cell(p) == Cell::Floor && !(avoid_agent && p == self.state.agent) {
                    free.push(p);
                }
            }
        }
        if free.is_empty() {
            None
        } else {
            Some(free[rng.random_range(0..free.len())])
        }
    }
}

fn door_key_like(config: &EnvConfig, rng: &mut ChaCha8Rng) -> Option<GridState> {
    let n = config.size;
    let mut b = Builder::new(config);
    let wall = rng.random_range(2..=n - 3);
    b.vwall(wall, 1..=n - 2);
    let door_row = rng.random_range(1..=n - 2);
    b.state.set(
        Pos::new(door_row, wall),
        Cell::Door {
            color: Color::Yellow,
            state: DoorState::Locked,
        },
    );
    b.state.set(Pos::new(n - 2, n - 2), Cell::Goal);
    let left_rows = 1..=n - 2;
    let left_cols = 1..=wall - 1;
    match config.task {
        Task::DoorKey => {
            let k = b.free_cell(rng, left_rows.clone(), left_cols.clone(), false)?;
            b.state.set(k, Cell::Key { color: Color::Yellow });
        }
        Task::BoxKey => {
            let k = b.free_cell(rng, left_rows.clone(), left_cols.clone(), false)?;
            b.state.set(
                k,
                Cell::Box {
                    color: Color::Blue,
                    contains: Some(Color::Yellow),
                },
            );
        }
        Task::BoxKeySemMod => {
            let bx = b.free_cell(rng, left_rows.clone(), left_cols.clone(), false)?;
            b.state.set(
                bx,
                Cell::Box {
                    color: Color::Blue,
                    contains: None,
                },
            );
            let k = b.free_cell(rng, left_rows.clone(), left_cols.clone(), false)?;
            b.state.set(k, Cell::Key { color: Color::Yellow });
        }
        _ => unreachable!(),
    }
    b.state.agent = b.free_cell(rng, left_rows, left_cols, false)?;
    Some(b.state)
}

fn unlock_pickup(config: &EnvConfig, rng: &mut ChaCha8Rng) -> Option<GridState> {
    let n = config.size;
    let mut b = Builder::new(config);
    let mid = n - 1;
    b.vwall(mid, 1..=n - 2);
    let door_row = rng.random_range(1..=n - 2);
    let sem = config.task == Task::UnlockPickupSemMod;
    b.state.set(
        Pos::new(door_row, mid),
        Cell::Door {
            color: Color::Yellow,
            state: if sem { DoorState::Open } else { DoorState::Locked },
        },
    );
    let bx = b.free_cell(rng, 1..=n - 2, mid + 1..=2 * n - 3, false)?;
    b.state.set(
        bx,
        Cell::Box {
            color: Color::Blue,
            contains: None,
        },
    );
    if !sem {
        let k = b.free_cell(rng, 1..=n - 2, 1..=mid - 1, false)?;
        b.state.set(k, Cell::Key { color: Color::Yellow });
    }
    b.state.agent = b.free_cell(rng, 1..=n - 2, 1..=mid - 1, false)?;
    Some(b.state)
}

/// Four quadrants split by a full cross wall, visited in a random cyclic
/// order with one door between consecutive quadrants.
fn multi_room(config: &EnvConfig, rng: &mut ChaCha8Rng) -> Option<GridState> {
    let n = config.size;
    let m = n / 2;
    let mut b = Builder::new(config);
    b.vwall(m, 1..=n - 2);
    b.hwall(m, 1..=n - 2);
    // Quadrant interiors: 0 top-left, 1 top-right, 2 bottom-right, 3 bottom-left.
    let quad = |q: usize| -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        match q {
            0 => (1..=m - 1, 1..=m - 1),
            1 => (1..=m - 1, m + 1..=n - 2),
            2 => (m + 1..=n - 2, m + 1..=n - 2),
            _ => (m + 1..=n - 2, 1..=m - 1),
        }
    };
    let start = rng.random_range(0..4usize);
    let forward = rng.random_bool(0.5);
    let order: Vec<usize> = (0..4)
        .map(|i| if forward { (start + i) % 4 } else { (start + 4 - i) % 4 })
        .collect();
    let mut colors = Color::ALL;
    colors.shuffle(rng);
    for (i, w) in order.windows(2).enumerate() {
        let (a, c) = (w[0].min(w[1]), w[0].max(w[1]));
        let door = match (a, c) {
            (0, 1) => Pos::new(rng.random_range(1..=m - 1), m),
            (1, 2) => Pos::new(m, rng.random_range(m + 1..=n - 2)),
            (2, 3) => Pos::new(rng.random_range(m + 1..=n - 2), m),
            (0, 3) => Pos::new(m, rng.random_range(1..=m - 1)),
            _ => unreachable!("cycle neighbours"),
        };
        b.state.set(
            door,
            Cell::Door {
                color: colors[i],
                state: DoorState::Closed,
            },
        );
    }
    let (gr, gc) = quad(order[3]);
    let g = b.free_cell(rng, gr, gc, false)?;
    b.state.set(g, Cell::Goal);
    let (ar, ac) = quad(order[0]);
    b.state.agent = b.free_cell(rng, ar, ac, false)?;
    Some(b.state)
}

pub(super) fn generate(config: &EnvConfig) -> Result<GridState, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..MAX_ATTEMPTS {
        let candidate = match config.task.base() {
            Task::DoorKey | Task::BoxKey => door_key_like(config, &mut rng),
            Task::UnlockPickup => unlock_pickup(config, &mut rng),
            Task::MultiRoom => multi_room(config, &mut rng),
            _ => unreachable!(),
        };
        if let Some(s) = candidate {
            if solvability_check(&s) {
                return Ok(s);
            }
        }
    }
    Err(EnvError::Generation {
        task: config.task,
        size: config.size,
        seed: config.seed,
        attempts: MAX_ATTEMPTS,
    })
}
