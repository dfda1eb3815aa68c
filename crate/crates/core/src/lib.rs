//! Simulation of stochastic memristor-capacitor circuits.
//!
//! Three engines share one device and circuit description:
//!
//! * [`mc`]: exact stochastic trajectories (Gillespie-style with
//!   time-dependent rates) and ensemble statistics;
//! * [`pde`]: finite-volume solution of the master equation for the joint
//!   state/charge density of the series circuit;
//! * [`analytic`]: closed forms and characteristics solutions used as
//!   references.

pub mod analytic;
pub mod circuit;
pub mod device;
pub mod mc;
pub mod pde;
pub mod quad;
