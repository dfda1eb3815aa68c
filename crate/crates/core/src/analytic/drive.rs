//! Deterministic RC transport along charge characteristics.

use super::{check_time, AnalyticError, ConstantDriveParams};
use crate::circuit::Waveform;
use crate::quad::{integrate_with_breaks, Tolerance};

/// `int_{from}^{to} exp((s - to)/(C R)) V(s)/R ds`, the driven part of the
/// RC response. Valid for either ordering of `from` and `to`.
pub(crate) fn drive_kernel(c: f64, r: f64, w: &Waveform, from: f64, to: f64) -> f64 {
    if from == to {
        return 0.0;
    }
    let rc = c * r;
    if w.is_constant() {
        let v = w.value(from);
        return -v * c * (-(to - from) / rc).exp_m1();
    }
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    let (vmin, vmax) = w.range(lo, hi);
    let scale = c * vmin.abs().max(vmax.abs());
    let mut f = |s: f64| ((s - to) / rc).exp() * w.value(s) / r;
    let breaks = w.breakpoints(lo, hi);
    integrate_with_breaks(
        &mut f,
        from,
        to,
        &breaks,
        Tolerance::relative(1e-12).with_abs(1e-15 * scale),
    )
    .value
}

/// Charge at time `to` on the characteristic through `(q, from)` for a
/// memristor fixed at resistance `r`.
pub fn flow(c: f64, r: f64, w: &Waveform, q: f64, from: f64, to: f64) -> f64 {
    q * (-(to - from) / (c * r)).exp() + drive_kernel(c, r, w, from, to)
}

/// RC charge under the constant drive of `params` through resistance `r`.
pub fn rc_charge(params: &ConstantDriveParams, r: f64, t: f64) -> Result<f64, AnalyticError> {
    check_time(t)?;
    let c = params.capacitance;
    let decay = (-t / (c * r)).exp();
    Ok(params.q0 * decay - params.va * c * (-t / (c * r)).exp_m1())
}

/// RC charge at `t` for an arbitrary waveform starting from `q0` at `t = 0`.
pub fn rc_charge_wave(q0: f64, c: f64, r: f64, w: &Waveform, t: f64) -> Result<f64, AnalyticError> {
    check_time(t)?;
    if !(c > 0.0 && r > 0.0) {
        return Err(AnalyticError::InvalidParams(
            "capacitance and resistance must be positive".into(),
        ));
    }
    Ok(flow(c, r, w, q0, 0.0, t))
}
