//! GALOIS core.

pub mod diff;
pub mod dsl;
pub mod gridworld;
pub mod grounding;
pub mod hole;
pub mod logic;
pub mod trainer;

pub use hole::Hole;
