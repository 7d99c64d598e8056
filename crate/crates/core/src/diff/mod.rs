//! Differentiable deduction: soft forward chaining with per-clause weights,
//! the reverse-mode tape it runs on, parameter storage, Adam and
//! checkpoints.

mod checkpoint;
mod engine;
mod params;
mod tape;

use thiserror::Error;

pub use checkpoint::{Checkpoint, CheckpointError, HeadState, HoleCheckpoint, CHECKPOINT_FORMAT};
pub use engine::{deduce, soft_step, DeductionResult, DEFAULT_TAU_MAX};
pub use params::{policy_update, AdamConfig, AdamState, Gradients, HoleParams, ParamStore};
pub use tape::{entropy, softmax, NodeId, Tape, TapeGrads};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("tape error: {0}")]
    Tape(String),
    #[error("numerics error: {0}")]
    Numerics(String),
}

/// Probabilistic sum `x + y - x y` on `[0, 1]`.
pub fn prob_sum(x: f64, y: f64) -> Result<f64, DiffError> {
    for v in [x, y] {
        if !(0.0..=1.0).contains(&v) {
            return Err(DiffError::Domain(format!("prob_sum argument {v} outside [0, 1]")));
        }
    }
    Ok(prob_sum_unchecked(x, y))
}

/// Evaluated as `hi + lo (1 - hi)` so the result is exactly symmetric and
/// never below `max(x, y)`.
pub(crate) fn prob_sum_unchecked(x: f64, y: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    (hi + lo * (1.0 - hi)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prob_sum_examples() {
        assert_eq!(prob_sum(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(prob_sum(1.0, 0.3).unwrap(), 1.0);
        assert_eq!(prob_sum(0.5, 0.5).unwrap(), 0.75);
        assert!(matches!(prob_sum(1.5, 0.0), Err(DiffError::Domain(_))));
        assert!(matches!(prob_sum(0.2, -0.1), Err(DiffError::Domain(_))));
    }

    proptest! {
        #[test]
        fn prob_sum_bounds_and_symmetry(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let z = prob_sum(x, y).unwrap();
            prop_assert!((0.0..=1.0).contains(&z));
            prop_assert!(z >= x.max(y));
            prop_assert_eq!(z, prob_sum(y, x).unwrap());
            prop_assert!((z - (x + y - x * y)).abs() < 1e-15);
        }
    }
}
