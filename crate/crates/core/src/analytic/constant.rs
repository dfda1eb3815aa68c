//! Constant-voltage drive with a deterministic initial charge.
//!
//! While `V_a - q/C > 0` only the `0 -> 1` transition is active and the
//! accumulated hazard along the RC trajectory in state 0 has the closed form
//! `(C R0 / tau0) [Ei(x0) - Ei(x0 e^{-t/(C R0)})]` with `x0 = (V_a - q0/C)/V0`.

use super::ei::{ei_scaled_down, expint_ei};
use super::{check_time, AnalyticError};
use crate::circuit::{SeriesCircuit, Waveform};
use crate::device::MemristorModel;
use crate::quad::{integrate_with_breaks, Tolerance};

/// Default end of the fast switching phase, seconds.
pub const DEFAULT_SATURATION_TIME: f64 = 1.0;

/// Below this `x0` the asymptotic no-switch formula is flagged as unreliable.
const ASYMPTOTIC_VALIDITY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDriveParams {
    /// Farads.
    pub capacitance: f64,
    /// Off-state resistance, ohms.
    pub r0: f64,
    /// On-state resistance, ohms.
    pub r1: f64,
    /// `0 -> 1` time constant, seconds.
    pub tau0: f64,
    /// `0 -> 1` voltage scale, volts.
    pub v0: f64,
    /// Applied voltage, volts.
    pub va: f64,
    /// Initial capacitor charge, coulombs.
    pub q0: f64,
}

impl ConstantDriveParams {
    /// C = 1 uF, R0 = 100 kOhm, R1 = 10 kOhm, tau0 = 3e5 s, V0 = 20 mV,
    /// V_a = 0.35 V, q0 = 0.
    pub fn reference_case() -> Self {
        Self {
            capacitance: 1e-6,
            r0: 1e5,
            r1: 1e4,
            tau0: 3e5,
            v0: 0.02,
            va: 0.35,
            q0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        for (name, v) in [
            ("capacitance", self.capacitance),
            ("r0", self.r0),
            ("r1", self.r1),
            ("v0", self.v0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AnalyticError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.tau0 > 0.0) {
            return Err(AnalyticError::InvalidParams(format!(
                "tau0 must be positive, got {}",
                self.tau0
            )));
        }
        if !(self.va.is_finite() && self.q0.is_finite()) {
            return Err(AnalyticError::InvalidParams(
                "va and q0 must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn rc_time(&self) -> f64 {
        self.capacitance * self.r0
    }

    /// Initial memristor voltage over `V0`.
    pub fn x0(&self) -> f64 {
        (self.va - self.q0 / self.capacitance) / self.v0
    }

    /// Binary model with symmetric down-transition parameters.
    pub fn model(&self) -> MemristorModel {
        MemristorModel::binary(self.r0, self.r1, self.tau0, self.v0, self.tau0, self.v0)
            .expect("validated parameters")
    }

    pub fn circuit(&self) -> SeriesCircuit {
        SeriesCircuit::new(self.model(), self.capacitance, Waveform::Constant(self.va))
    }

    fn check_regime(&self) -> Result<f64, AnalyticError> {
        self.validate()?;
        let x0 = self.x0();
        if x0 > 0.0 {
            Ok(x0)
        } else {
            Err(AnalyticError::Domain(format!(
                "requires V_a - q0/C > 0 (got {:e} V)",
                self.va - self.q0 / self.capacitance
            )))
        }
    }
}

/// Accumulated `0 -> 1` hazard along the state-0 trajectory up to `t`.
pub fn switching_hazard(p: &ConstantDriveParams, t: f64) -> Result<f64, AnalyticError> {
    check_time(t)?;
    let x0 = p.check_regime()?;
    if t == 0.0 || p.tau0.is_infinite() {
        return Ok(0.0);
    }
    let k = p.rc_time() / p.tau0;
    let ei0 = expint_ei(x0)?;
    Ok(k * (ei0 - ei_scaled_down(x0, t / p.rc_time())))
}

/// Probability of still being in state 0 at time `t`.
pub fn p0_constant_voltage(p: &ConstantDriveParams, t: f64) -> Result<f64, AnalyticError> {
    Ok((-switching_hazard(p, t)?).exp())
}

fn p1(p: &ConstantDriveParams, t: f64) -> f64 {
    -(-switching_hazard(p, t).expect("checked by caller")).exp_m1()
}

/// The two quadrature evaluations of the conditional mean switching time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSwitchingTime {
    /// `(1/p1(t*)) int_0^t* t dp1/dt dt`.
    pub moment: f64,
    /// `t* - (1/p1(t*)) int_0^t* p1 dt`.
    pub by_parts: f64,
}

/// Relative agreement required between the two routes.
const ROUTE_AGREEMENT: f64 = 1e-6;

pub fn mean_switching_time_routes(
    p: &ConstantDriveParams,
    t_star: f64,
) -> Result<MeanSwitchingTime, AnalyticError> {
    if !(t_star > 0.0 && t_star.is_finite()) {
        return Err(AnalyticError::Domain(format!(
            "saturation time must be positive, got {t_star}"
        )));
    }
    let x0 = p.check_regime()?;
    let p1_star = p1(p, t_star);
    if !(p1_star > 0.0) {
        return Err(AnalyticError::Domain(
            "no switching probability accumulated by t* (p1(t*) = 0)".into(),
        ));
    }
    let rc = p.rc_time();
    let tol = Tolerance::relative(1e-11).with_abs(1e-16 * t_star);
    // the hazard is steep for t << RC; seed the partition geometrically
    let breaks: Vec<f64> = (1..8)
        .map(|k| rc * 10f64.powi(-k))
        .chain([rc, 10.0 * rc])
        .collect();

    let mut density = |t: f64| {
        let rate = (x0 * (-t / rc).exp()).exp() / p.tau0;
        t * rate * (-switching_hazard(p, t).expect("regime checked")).exp()
    };
    let moment = integrate_with_breaks(&mut density, 0.0, t_star, &breaks, tol);
    let mut survival = |t: f64| p1(p, t);
    let area = integrate_with_breaks(&mut survival, 0.0, t_star, &breaks, tol);
    if !(moment.converged && area.converged) {
        return Err(AnalyticError::Quadrature(
            "mean switching time integrals".into(),
        ));
    }
    let out = MeanSwitchingTime {
        moment: moment.value / p1_star,
        by_parts: t_star - area.value / p1_star,
    };
    let rel = (out.moment - out.by_parts).abs() / out.moment.abs();
    if rel > ROUTE_AGREEMENT {
        return Err(AnalyticError::Quadrature(format!(
            "mean switching time routes disagree: {} vs {} (rel {rel:e})",
            out.moment, out.by_parts
        )));
    }
    Ok(out)
}

/// Mean time of the first switch among realizations that switched by `t_star`.
pub fn mean_switching_time(p: &ConstantDriveParams, t_star: f64) -> Result<f64, AnalyticError> {
    mean_switching_time_routes(p, t_star).map(|m| m.moment)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticP0 {
    pub value: f64,
    /// Set when `x0 < 5`, where the large-argument expansion is poor.
    pub outside_validity: bool,
}

/// Large-`x0` form of the plateau no-switch probability:
/// `exp[-(C R0/tau0) e^x0 / (x0 - 1)]`.
pub fn p0_asymptotic(p: &ConstantDriveParams) -> Result<AsymptoticP0, AnalyticError> {
    p.validate()?;
    let x = p.x0();
    if x <= 1.0 {
        return Err(AnalyticError::Domain(format!(
            "asymptotic form needs (V_a - q0/C)/V0 > 1, got {x}"
        )));
    }
    let k = p.rc_time() / p.tau0;
    let exponent = if k == 0.0 {
        0.0
    } else {
        k * x.exp() / (x - 1.0)
    };
    Ok(AsymptoticP0 {
        value: (-exponent).exp(),
        outside_validity: x < ASYMPTOTIC_VALIDITY,
    })
}
