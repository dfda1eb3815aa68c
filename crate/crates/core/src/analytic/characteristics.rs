//! Method-of-characteristics solutions for the series circuit.
//!
//! Between switches the charge of a realization follows the RC flow of its
//! current resistance, so densities are transported along those curves. In
//! the unidirectional regime (all mass at `q <= C V(t)`, hence no `1 -> 0`
//! transitions) the state-0 density is the transported initial density
//! damped by the hazard accumulated along its characteristic, and the
//! state-1 density is the transported initial state-1 density plus the mass
//! that switched at an earlier time and then rode the `R1` characteristics.

use std::sync::Arc;

use super::drive::{drive_kernel, flow};
use super::ei::{ei_scaled_down, expint_ei};
use super::{check_time, AnalyticError, Density1D};
use crate::circuit::Waveform;
use crate::device::MemristorModel;
use crate::quad::{find_root, integrate_with_breaks, Tolerance};

/// Inner time integrals are evaluated to this relative tolerance.
const INNER_TOL: f64 = 1e-8;
/// Sample count for the regime check along `[0, t]`.
const REGIME_SAMPLES: usize = 256;

/// Transports `f` for time `t` through a fixed resistance `r`:
/// `p(q, t) = e^{t/CR} f(q e^{t/CR} - int_0^t e^{s/CR} V(s)/R ds)`.
/// Mass is preserved exactly; point masses move along the RC trajectory.
pub fn no_switch_density(
    f: &Density1D,
    r: f64,
    c: f64,
    waveform: &Waveform,
    t: f64,
) -> Result<Density1D, AnalyticError> {
    check_time(t)?;
    if !(r > 0.0 && c > 0.0) {
        return Err(AnalyticError::InvalidParams(
            "resistance and capacitance must be positive".into(),
        ));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let scale = (-t / (c * r)).exp();
    let offset = drive_kernel(c, r, waveform, 0.0, t);
    Ok(f.push_affine(scale, offset))
}

#[derive(Debug, Clone)]
pub struct UnidirectionalSolution {
    pub p0: Density1D,
    pub p1: Density1D,
}

struct Ctx {
    model: MemristorModel,
    c: f64,
    r0: f64,
    r1: f64,
    w: Waveform,
}

impl Ctx {
    fn gamma(&self, vm: f64) -> f64 {
        self.model.up_unchecked(0, vm).value
    }

    fn vm(&self, q: f64, s: f64) -> f64 {
        self.w.value(s) - q / self.c
    }

    /// Hazard accumulated over `[0, t]` by a state-0 realization that
    /// started at charge `q_init`.
    fn hazard_from(&self, q_init: f64, t: f64) -> f64 {
        if t == 0.0 || self.model.tau_up()[0].is_infinite() {
            return 0.0;
        }
        if self.w.is_constant() {
            self.hazard_closed_form(q_init, t)
        } else {
            self.hazard_quadrature(q_init, t)
        }
    }

    /// Constant drive: the memristor voltage decays as `V_M(0) e^{-s/(C R0)}`,
    /// which integrates to a difference of exponential integrals.
    fn hazard_closed_form(&self, q_init: f64, t: f64) -> f64 {
        let v0 = self.model.v_up()[0];
        let tau0 = self.model.tau_up()[0];
        let rc = self.c * self.r0;
        let x0 = self.vm(q_init, 0.0) / v0;
        if x0 <= 0.0 {
            return 0.0;
        }
        let upper = expint_ei(x0).expect("positive argument");
        rc / tau0 * (upper - ei_scaled_down(x0, t / rc))
    }

    fn hazard_quadrature(&self, q_init: f64, t: f64) -> f64 {
        let mut integrand = |s: f64| {
            let qs = flow(self.c, self.r0, &self.w, q_init, 0.0, s);
            self.gamma(self.vm(qs, s))
        };
        let breaks = self.w.breakpoints(0.0, t);
        integrate_with_breaks(
            &mut integrand,
            0.0,
            t,
            &breaks,
            Tolerance::relative(INNER_TOL).with_abs(1e-14),
        )
        .value
    }
}

/// Solves the binary master equation in the unidirectional regime starting
/// from `p0(q, 0) = f`, `p1(q, 0) = g`.
///
/// Fails with [`AnalyticError::RegimeViolated`] if mass can reach
/// `q > C V(s)` for some `s` in `[0, t]`, which would activate `1 -> 0`.
pub fn unidirectional_densities(
    f: &Density1D,
    g: &Density1D,
    model: &MemristorModel,
    c: f64,
    waveform: &Waveform,
    t: f64,
) -> Result<UnidirectionalSolution, AnalyticError> {
    check_time(t)?;
    if model.num_states() != 2 {
        return Err(AnalyticError::Domain(format!(
            "unidirectional solution needs a binary device, got {} states",
            model.num_states()
        )));
    }
    if !(c > 0.0) {
        return Err(AnalyticError::InvalidParams(
            "capacitance must be positive".into(),
        ));
    }
    let ctx = Arc::new(Ctx {
        model: model.clone(),
        c,
        r0: model.resistance(0),
        r1: model.resistance(1),
        w: waveform.clone(),
    });
    check_regime(&ctx, f, g, t)?;
    if t == 0.0 {
        return Ok(UnidirectionalSolution {
            p0: f.clone(),
            p1: g.clone(),
        });
    }

    let transported_g = no_switch_density(g, ctx.r1, c, waveform, t)?;
    let mut p0_parts = Vec::new();
    let mut p1_parts = vec![transported_g];
    for part in flatten(f) {
        match part {
            Density1D::Delta { location, weight } => {
                let (d0, d1) = delta_part(&ctx, location, weight, t);
                p0_parts.push(d0);
                p1_parts.push(d1);
            }
            Density1D::Continuous { pdf, support } => {
                let (d0, d1) = continuous_part(&ctx, pdf, support, t);
                p0_parts.push(d0);
                p1_parts.push(d1);
            }
            Density1D::Mixture(_) => unreachable!("flattened"),
        }
    }
    Ok(UnidirectionalSolution {
        p0: collapse(p0_parts),
        p1: collapse(p1_parts),
    })
}

fn flatten(d: &Density1D) -> Vec<Density1D> {
    match d {
        Density1D::Mixture(parts) => parts.iter().flat_map(flatten).collect(),
        other => vec![other.clone()],
    }
}

fn collapse(mut parts: Vec<Density1D>) -> Density1D {
    parts.retain(|p| p.support().is_some());
    if parts.len() == 1 {
        parts.pop().expect("one part")
    } else {
        Density1D::Mixture(parts)
    }
}

fn check_regime(ctx: &Ctx, f: &Density1D, g: &Density1D, t: f64) -> Result<(), AnalyticError> {
    let mut times: Vec<f64> = (0..=REGIME_SAMPLES)
        .map(|k| t * k as f64 / REGIME_SAMPLES as f64)
        .collect();
    for b in ctx.w.breakpoints(0.0, t) {
        // both sides of a discontinuity
        times.push(b);
        times.push(b * (1.0 - 1e-12));
    }
    times.sort_by(f64::total_cmp);
    let hi_f = f.support().map(|s| s.1);
    let hi_g = g.support().map(|s| s.1);
    for &s in &times {
        let limit = ctx.c * ctx.w.value(s);
        let slack = 1e-12 * ctx.c * ctx.w.value(s).abs().max(1e-300);
        let mut highest = f64::NEG_INFINITY;
        if let Some(h) = hi_f {
            highest = highest
                .max(flow(ctx.c, ctx.r0, &ctx.w, h, 0.0, s))
                .max(flow(ctx.c, ctx.r1, &ctx.w, h, 0.0, s));
        }
        if let Some(h) = hi_g {
            highest = highest.max(flow(ctx.c, ctx.r1, &ctx.w, h, 0.0, s));
        }
        if highest > limit + slack {
            return Err(AnalyticError::RegimeViolated { time: s });
        }
    }
    Ok(())
}

/// Point mass `weight` at `q0`: state 0 stays a point mass with survival
/// weight; the switched mass spreads over the charges reached by switching
/// at some `s` and relaxing through `R1` for the remaining `t - s`.
fn delta_part(ctx: &Arc<Ctx>, q0: f64, weight: f64, t: f64) -> (Density1D, Density1D) {
    let at_t = flow(ctx.c, ctx.r0, &ctx.w, q0, 0.0, t);
    let hazard_t = ctx.hazard_from(q0, t);
    let survival_t = (-hazard_t).exp();
    let p0 = Density1D::delta(at_t, weight * survival_t);
    let switched = weight * -(-hazard_t).exp_m1();

    if ctx.r0 == ctx.r1 {
        return (p0, Density1D::delta(at_t, switched));
    }
    if switched == 0.0 {
        return (p0, Density1D::zero());
    }

    let endpoint = {
        let ctx = ctx.clone();
        move |s: f64| {
            let xs = flow(ctx.c, ctx.r0, &ctx.w, q0, 0.0, s);
            flow(ctx.c, ctx.r1, &ctx.w, xs, s, t)
        }
    };
    let (m0, mt) = (endpoint(0.0), endpoint(t));
    let support = (m0.min(mt), m0.max(mt));
    let ctx = ctx.clone();
    let pdf = move |q: f64| {
        let s = find_root(|s| endpoint(s) - q, 0.0, t, 1e-15 * t.max(1e-300));
        let xs = flow(ctx.c, ctx.r0, &ctx.w, q0, 0.0, s);
        let vm = ctx.vm(xs, s);
        let survival = (-ctx.hazard_from(q0, s)).exp();
        let jac = (vm * (1.0 / ctx.r0 - 1.0 / ctx.r1)).abs();
        weight * ctx.gamma(vm) * survival * ((t - s) / (ctx.c * ctx.r1)).exp() / jac
    };
    (p0, Density1D::from_fn(support.0, support.1, pdf))
}

fn continuous_part(
    ctx: &Arc<Ctx>,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: (f64, f64),
    t: f64,
) -> (Density1D, Density1D) {
    // state 0 at time s, evaluated at charge q
    let p0_at = {
        let ctx = ctx.clone();
        let f = f.clone();
        move |q: f64, s: f64| -> f64 {
            let q_init = flow(ctx.c, ctx.r0, &ctx.w, q, s, 0.0);
            if q_init < support.0 || q_init > support.1 {
                return 0.0;
            }
            let jac = (s / (ctx.c * ctx.r0)).exp();
            jac * f(q_init) * (-ctx.hazard_from(q_init, s)).exp()
        }
    };
    let lo0 = flow(ctx.c, ctx.r0, &ctx.w, support.0, 0.0, t);
    let hi0 = flow(ctx.c, ctx.r0, &ctx.w, support.1, 0.0, t);
    let p0 = {
        let p0_at = p0_at.clone();
        Density1D::from_fn(lo0, hi0, move |q| p0_at(q, t))
    };

    // reachable charges for switched mass: switch at s, then relax via R1
    let reach = |x: f64, s: f64| {
        let xs = flow(ctx.c, ctx.r0, &ctx.w, x, 0.0, s);
        flow(ctx.c, ctx.r1, &ctx.w, xs, s, t)
    };
    let ends = [
        reach(support.0, 0.0),
        reach(support.0, t),
        reach(support.1, 0.0),
        reach(support.1, t),
    ];
    let lo1 = ends.iter().copied().fold(f64::INFINITY, f64::min);
    let hi1 = ends.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let ctx = ctx.clone();
    let pdf1 = move |q: f64| {
        // s -> initial charge of the state-0 ancestor; monotone in s
        let ancestor = |s: f64| {
            let qs = flow(ctx.c, ctx.r1, &ctx.w, q, t, s);
            flow(ctx.c, ctx.r0, &ctx.w, qs, s, 0.0)
        };
        let (a0, at) = (ancestor(0.0), ancestor(t));
        let mut breaks = ctx.w.breakpoints(0.0, t);
        for edge in [support.0, support.1] {
            if (a0 - edge) * (at - edge) < 0.0 {
                breaks.push(find_root(|s| ancestor(s) - edge, 0.0, t, 1e-14 * t));
            }
        }
        let mut integrand = |s: f64| {
            let qs = flow(ctx.c, ctx.r1, &ctx.w, q, t, s);
            let p = p0_at(qs, s);
            if p == 0.0 {
                return 0.0;
            }
            ctx.gamma(ctx.vm(qs, s)) * ((t - s) / (ctx.c * ctx.r1)).exp() * p
        };
        integrate_with_breaks(
            &mut integrand,
            0.0,
            t,
            &breaks,
            Tolerance::relative(INNER_TOL).with_abs(1e-300),
        )
        .value
    };
    (p0, Density1D::from_fn(lo1, hi1, pdf1))
}
