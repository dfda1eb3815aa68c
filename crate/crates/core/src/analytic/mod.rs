//! Closed-form and quadrature-reduced solutions for the series
//! memristor-capacitor circuit.

mod characteristics;
mod constant;
mod density;
mod drive;
pub mod ei;

pub use characteristics::{no_switch_density, unidirectional_densities, UnidirectionalSolution};
pub use constant::{
    mean_switching_time, mean_switching_time_routes, p0_asymptotic, p0_constant_voltage,
    switching_hazard, AsymptoticP0, ConstantDriveParams, MeanSwitchingTime,
    DEFAULT_SATURATION_TIME,
};
pub use density::Density1D;
pub use drive::{flow, rc_charge, rc_charge_wave};
pub use ei::expint_ei;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("unidirectional regime violated at t = {time:e} s: charge exceeds C*V(t)")]
    RegimeViolated { time: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

fn check_time(t: f64) -> Result<(), AnalyticError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(AnalyticError::NegativeTime(t))
    }
}
