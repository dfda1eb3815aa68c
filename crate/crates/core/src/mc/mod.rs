//! Monte Carlo sampling of the piecewise-deterministic switching process.

mod ensemble;
mod hazard;
mod trajectory;

pub use ensemble::{run_ensemble, trajectory_rng, EnsembleConfig, EnsembleStats, HistogramSpec};
pub use hazard::{hazard_accumulate, HazardOutcome};
pub use trajectory::{
    simulate_trajectory, simulate_with_rng, SwitchEvent, TrajectoryRecord, TrajectorySample,
};

use thiserror::Error;

use crate::circuit::CircuitError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("invalid initial state: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("ODE step size underflow at t = {time:e} s (stiff dynamics)")]
    StepUnderflow { time: f64 },
    #[error("memristor {memristor} reached its threshold at t = {time:e} s with zero voltage")]
    Stalled { time: f64, memristor: usize },
}
