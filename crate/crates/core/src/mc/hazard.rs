//! Inversion of an accumulated hazard along a deterministic path segment.

use crate::quad::{find_root, gk15, integrate, Tolerance};

/// Relative accuracy of each accepted quadrature panel.
const PANEL_REL: f64 = 1e-11;
/// Absolute accuracy budget of the whole segment, relative to the threshold.
const SEGMENT_ABS: f64 = 1e-13;
/// Time resolution of the returned switch time, relative to the segment.
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HazardOutcome {
    /// The accumulated hazard reached the threshold at `time`.
    Switched { time: f64 },
    /// The segment ended first; `accumulated` is the hazard over all of it.
    Exhausted { accumulated: f64 },
}

/// Accumulates `int_{t0}^{t} rate(s) ds` from left to right and returns the
/// first `t` in `[t0, t1]` where it reaches `threshold`.
///
/// Panels are integrated with adaptive Gauss-Kronrod rules (split at
/// `breaks`, where `rate` may be discontinuous); inside the panel that
/// crosses the threshold the time is located by root bracketing to
/// `1e-9 (t1 - t0)`.
pub fn hazard_accumulate<F: FnMut(f64) -> f64>(
    mut rate: F,
    t0: f64,
    t1: f64,
    threshold: f64,
    breaks: &[f64],
) -> HazardOutcome {
    if !(t1 > t0) {
        return HazardOutcome::Exhausted { accumulated: 0.0 };
    }
    if threshold <= 0.0 {
        return HazardOutcome::Switched { time: t0 };
    }
    let span = t1 - t0;
    let abs_budget = SEGMENT_ABS * threshold.max(1.0);
    let min_width = 1e-13 * span;

    let mut edges: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > t0 && b < t1)
        .collect();
    edges.push(t0);
    edges.push(t1);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    // pending panels; the leftmost is popped first
    let mut stack: Vec<(f64, f64)> = edges.windows(2).rev().map(|w| (w[0], w[1])).collect();

    let mut acc = 0.0;
    while let Some((a, b)) = stack.pop() {
        let (value, error) = gk15(&mut rate, a, b);
        let tol = (PANEL_REL * value.abs()).max(abs_budget * (b - a) / span);
        if error > tol && b - a > min_width {
            let mid = 0.5 * (a + b);
            stack.push((mid, b));
            stack.push((a, mid));
            continue;
        }
        if acc + value >= threshold {
            let need = threshold - acc;
            let time = find_root(
                |t| {
                    integrate(
                        |s| rate(s),
                        a,
                        t,
                        Tolerance::relative(PANEL_REL).with_abs(abs_budget * (t - a) / span),
                    )
                    .value
                        - need
                },
                a,
                b,
                TIME_TOL * span,
            );
            return HazardOutcome::Switched { time };
        }
        acc += value;
    }
    HazardOutcome::Exhausted { accumulated: acc }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{switching_hazard, ConstantDriveParams};
    use crate::device::MemristorModel;

    #[test]
    fn constant_rate_inversion() {
        let m = MemristorModel::binary(1e5, 1e4, 3e5, 0.02, 3e5, 0.02).unwrap();
        let rate = m.rate_up(0, 0.35).unwrap();
        assert!((rate - 132.749).abs() < 1e-3);
        match hazard_accumulate(|_| rate, 0.0, 1.0, 1.0, &[]) {
            HazardOutcome::Switched { time } => {
                assert!((time - 1.0 / rate).abs() < 1e-9, "{time}");
                assert!((time - 7.54e-3).abs() < 1e-5);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn zero_rate_is_exhausted() {
        assert_eq!(
            hazard_accumulate(|_| 0.0, 0.0, 1.0, 0.5, &[]),
            HazardOutcome::Exhausted { accumulated: 0.0 }
        );
        assert_eq!(
            hazard_accumulate(|_| 5.0, 1.0, 1.0, 0.5, &[]),
            HazardOutcome::Exhausted { accumulated: 0.0 }
        );
    }

    #[test]
    fn series_segment_matches_closed_form() {
        let p = ConstantDriveParams::reference_case();
        let m = p.model();
        let rc = p.rc_time();
        let rate = |t: f64| {
            let q = p.va * p.capacitance * -(-t / rc).exp_m1();
            m.rate_up(0, p.va - q / p.capacitance).unwrap()
        };
        let exact = switching_hazard(&p, 1.0).unwrap();
        assert!((exact - 0.807).abs() < 2e-3);
        match hazard_accumulate(rate, 0.0, 1.0, 10.0, &[]) {
            HazardOutcome::Exhausted { accumulated } => {
                assert!(((accumulated - exact) / exact).abs() < 1e-9)
            }
            o => panic!("{o:?}"),
        }
        for target in [0.05, 0.3, 0.6, 0.8] {
            let HazardOutcome::Switched { time } = hazard_accumulate(rate, 0.0, 1.0, target, &[])
            else {
                panic!("expected a switch for {target}");
            };
            let got = switching_hazard(&p, time).unwrap();
            // time resolved to 1e-9 of the segment
            assert!(
                (got - target).abs() < 1e-9 * rate(time) + 1e-10,
                "{target}: {got}"
            );
        }
    }

    #[test]
    fn discontinuous_rate_with_break() {
        let rate = |t: f64| if t < 0.3 { 1.0 } else { 3.0 };
        let HazardOutcome::Switched { time } = hazard_accumulate(rate, 0.0, 1.0, 0.9, &[0.3])
        else {
            panic!()
        };
        assert!((time - 0.5).abs() < 1e-9);
        let HazardOutcome::Switched { time } = hazard_accumulate(rate, 0.0, 1.0, 0.9, &[]) else {
            panic!()
        };
        assert!((time - 0.5).abs() < 1e-8);
    }
}
