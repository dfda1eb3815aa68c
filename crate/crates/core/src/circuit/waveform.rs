use std::f64::consts::TAU;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("piecewise-linear waveform needs at least one breakpoint")]
    EmptyPwl,
    #[error("piecewise-linear breakpoint times must be strictly increasing (index {0})")]
    PwlNotIncreasing(usize),
    #[error("waveform parameter {0} must be finite")]
    NonFinite(&'static str),
    #[error("step time must be non-negative")]
    NegativeStepTime,
}

/// Source voltage as a function of time, defined for all `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Constant(f64),
    /// `initial` for `t < at`, `final_value` from `at` on.
    Step {
        initial: f64,
        final_value: f64,
        at: f64,
    },
    /// `offset + amplitude * sin(2 pi frequency t)`.
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// Linear interpolation between `(t, v)` points; held flat outside.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl Waveform {
    pub fn constant(volts: f64) -> Self {
        Waveform::Constant(volts)
    }

    pub fn step(initial: f64, final_value: f64, at: f64) -> Result<Self, WaveformError> {
        if !(initial.is_finite() && final_value.is_finite() && at.is_finite()) {
            return Err(WaveformError::NonFinite("step"));
        }
        if at < 0.0 {
            return Err(WaveformError::NegativeStepTime);
        }
        Ok(Waveform::Step {
            initial,
            final_value,
            at,
        })
    }

    pub fn sine(offset: f64, amplitude: f64, frequency: f64) -> Result<Self, WaveformError> {
        if !(offset.is_finite() && amplitude.is_finite() && frequency.is_finite()) {
            return Err(WaveformError::NonFinite("sine"));
        }
        Ok(Waveform::Sine {
            offset,
            amplitude,
            frequency,
        })
    }

    pub fn pwl(points: Vec<(f64, f64)>) -> Result<Self, WaveformError> {
        if points.is_empty() {
            return Err(WaveformError::EmptyPwl);
        }
        if points
            .iter()
            .any(|(t, v)| !(t.is_finite() && v.is_finite()))
        {
            return Err(WaveformError::NonFinite("pwl"));
        }
        for (k, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(WaveformError::PwlNotIncreasing(k + 1));
            }
        }
        Ok(Waveform::PiecewiseLinear(points))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant(v) => *v,
            Waveform::Step {
                initial,
                final_value,
                at,
            } => {
                if t < *at {
                    *initial
                } else {
                    *final_value
                }
            }
            Waveform::Sine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (TAU * frequency * t).sin(),
            Waveform::PiecewiseLinear(points) => pwl_value(points, t),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Waveform::Constant(_) => true,
            Waveform::Step {
                initial,
                final_value,
                ..
            } => initial == final_value,
            Waveform::Sine {
                amplitude,
                frequency,
                ..
            } => *amplitude == 0.0 || *frequency == 0.0,
            Waveform::PiecewiseLinear(points) => points.iter().all(|p| p.1 == points[0].1),
        }
    }

    /// Interior times in `(t0, t1)` where the waveform is not smooth.
    /// Quadrature routines split their domain at these points.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            Waveform::Step { at, .. } if *at > t0 && *at < t1 => vec![*at],
            Waveform::PiecewiseLinear(points) => points
                .iter()
                .map(|p| p.0)
                .filter(|&t| t > t0 && t < t1)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Exact minimum and maximum over `[t0, t1]`.
    pub fn range(&self, t0: f64, t1: f64) -> (f64, f64) {
        match self {
            Waveform::Constant(v) => (*v, *v),
            Waveform::Step { .. } => {
                let mut lo = self.value(t0).min(self.value(t1));
                let mut hi = self.value(t0).max(self.value(t1));
                for b in self.breakpoints(t0, t1) {
                    lo = lo.min(self.value(b));
                    hi = hi.max(self.value(b));
                }
                (lo, hi)
            }
            Waveform::Sine {
                offset,
                amplitude,
                frequency,
            } => {
                let f = frequency.abs();
                if f == 0.0 || *amplitude == 0.0 {
                    let v = self.value(t0);
                    return (v, v);
                }
                let mut lo = self.value(t0).min(self.value(t1));
                let mut hi = self.value(t0).max(self.value(t1));
                // extrema of sin(2 pi f t) sit at t = (k + 1/4) / (2 f)
                let k0 = (2.0 * f * t0 - 0.25).ceil() as i64;
                let k1 = (2.0 * f * t1 - 0.25).floor() as i64;
                if k1 - k0 >= 2 {
                    return (offset - amplitude.abs(), offset + amplitude.abs());
                }
                for k in k0..=k1 {
                    let t = (k as f64 + 0.25) / (2.0 * f);
                    let v = self.value(t);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
            Waveform::PiecewiseLinear(_) => {
                let mut lo = self.value(t0).min(self.value(t1));
                let mut hi = self.value(t0).max(self.value(t1));
                for b in self.breakpoints(t0, t1) {
                    let v = self.value(b);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        }
    }
}

fn pwl_value(points: &[(f64, f64)], t: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let k = points.partition_point(|p| p.0 <= t);
    let (ta, va) = points[k - 1];
    let (tb, vb) = points[k];
    va + (vb - va) * (t - ta) / (tb - ta)
}
