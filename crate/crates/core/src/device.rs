//! Discrete-state stochastic memristor.
//!
//! A device has `G` resistance levels `R_0..R_{G-1}` and switches only between
//! adjacent levels. Up-transitions `i -> i+1` fire at positive device voltage
//! with rate `1 / (tau_up[i] * exp(-v / v_up[i]))`; down-transitions
//! `i+1 -> i` fire at negative voltage with the mirrored law. At exactly zero
//! volts both rates vanish.

use thiserror::Error;

/// Default ceiling applied to every evaluated rate, in 1/s.
pub const DEFAULT_RATE_CEILING: f64 = 1e30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("memristor needs at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("{field}: expected {expected} values, got {got}")]
    Length {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{field}[{index}] must be strictly positive, got {value}")]
    NonPositive {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("state index {index} out of range for {op} on a {states}-state device")]
    StateOutOfRange {
        op: &'static str,
        index: usize,
        states: usize,
    },
    #[error("rate ceiling must be positive and finite, got {0}")]
    BadCeiling(f64),
}

/// A rate value together with a flag telling whether it hit the ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEval {
    pub value: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemristorModel {
    resistances: Vec<f64>,
    tau_up: Vec<f64>,
    v_up: Vec<f64>,
    tau_down: Vec<f64>,
    v_down: Vec<f64>,
    rate_ceiling: f64,
}

impl MemristorModel {
    /// Builds a model with per-transition parameters. `tau_*` and `v_*` each
    /// hold `G - 1` entries, entry `i` describing the `i <-> i+1` pair.
    ///
    /// Time constants may be `+inf`, which disables that transition.
    pub fn new(
        resistances: Vec<f64>,
        tau_up: Vec<f64>,
        v_up: Vec<f64>,
        tau_down: Vec<f64>,
        v_down: Vec<f64>,
    ) -> Result<Self, DeviceError> {
        let g = resistances.len();
        if g < 2 {
            return Err(DeviceError::TooFewStates(g));
        }
        for (field, values) in [
            ("tau_up", &tau_up),
            ("v_up", &v_up),
            ("tau_down", &tau_down),
            ("v_down", &v_down),
        ] {
            if values.len() != g - 1 {
                return Err(DeviceError::Length {
                    field,
                    expected: g - 1,
                    got: values.len(),
                });
            }
        }
        check_positive("resistances", &resistances, false)?;
        check_positive("tau_up", &tau_up, true)?;
        check_positive("v_up", &v_up, false)?;
        check_positive("tau_down", &tau_down, true)?;
        check_positive("v_down", &v_down, false)?;
        Ok(Self {
            resistances,
            tau_up,
            v_up,
            tau_down,
            v_down,
            rate_ceiling: DEFAULT_RATE_CEILING,
        })
    }

    /// Replicates a single `(tau, V)` pair per direction across all transitions.
    pub fn uniform(
        resistances: Vec<f64>,
        tau_up: f64,
        v_up: f64,
        tau_down: f64,
        v_down: f64,
    ) -> Result<Self, DeviceError> {
        let n = resistances.len().saturating_sub(1);
        Self::new(
            resistances,
            vec![tau_up; n],
            vec![v_up; n],
            vec![tau_down; n],
            vec![v_down; n],
        )
    }

    /// Binary device with `R_0` (off) and `R_1` (on).
    pub fn binary(
        r0: f64,
        r1: f64,
        tau0: f64,
        v0: f64,
        tau1: f64,
        v1: f64,
    ) -> Result<Self, DeviceError> {
        Self::new(vec![r0, r1], vec![tau0], vec![v0], vec![tau1], vec![v1])
    }

    pub fn with_rate_ceiling(mut self, ceiling: f64) -> Result<Self, DeviceError> {
        if !(ceiling.is_finite() && ceiling > 0.0) {
            return Err(DeviceError::BadCeiling(ceiling));
        }
        self.rate_ceiling = ceiling;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.resistances.len()
    }

    pub fn resistances(&self) -> &[f64] {
        &self.resistances
    }

    /// Resistance of state `i`. Panics if `i` is out of range.
    pub fn resistance(&self, i: usize) -> f64 {
        self.resistances[i]
    }

    pub fn tau_up(&self) -> &[f64] {
        &self.tau_up
    }

    pub fn v_up(&self) -> &[f64] {
        &self.v_up
    }

    pub fn tau_down(&self) -> &[f64] {
        &self.tau_down
    }

    pub fn v_down(&self) -> &[f64] {
        &self.v_down
    }

    pub fn rate_ceiling(&self) -> f64 {
        self.rate_ceiling
    }

    /// Rate of `i -> i+1` at device voltage `v_m`.
    pub fn rate_up(&self, i: usize, v_m: f64) -> Result<f64, DeviceError> {
        self.eval_up(i, v_m).map(|r| r.value)
    }

    /// Rate of `i -> i-1` at device voltage `v_m`.
    pub fn rate_down(&self, i: usize, v_m: f64) -> Result<f64, DeviceError> {
        self.eval_down(i, v_m).map(|r| r.value)
    }

    pub fn eval_up(&self, i: usize, v_m: f64) -> Result<RateEval, DeviceError> {
        if i + 1 >= self.num_states() {
            return Err(DeviceError::StateOutOfRange {
                op: "rate_up",
                index: i,
                states: self.num_states(),
            });
        }
        Ok(self.up_unchecked(i, v_m))
    }

    pub fn eval_down(&self, i: usize, v_m: f64) -> Result<RateEval, DeviceError> {
        if i == 0 || i >= self.num_states() {
            return Err(DeviceError::StateOutOfRange {
                op: "rate_down",
                index: i,
                states: self.num_states(),
            });
        }
        Ok(self.down_unchecked(i, v_m))
    }

    /// Sum of the rates leaving state `i`; boundary states contribute only
    /// their single existing transition.
    pub fn total_exit_rate(&self, i: usize, v_m: f64) -> Result<f64, DeviceError> {
        if i >= self.num_states() {
            return Err(DeviceError::StateOutOfRange {
                op: "total_exit_rate",
                index: i,
                states: self.num_states(),
            });
        }
        Ok(self.exit_rate_unchecked(i, v_m))
    }

    pub(crate) fn up_unchecked(&self, i: usize, v_m: f64) -> RateEval {
        if v_m > 0.0 {
            self.clamp(exp_rate(self.tau_up[i], v_m / self.v_up[i]))
        } else {
            RateEval {
                value: 0.0,
                clamped: false,
            }
        }
    }

    pub(crate) fn down_unchecked(&self, i: usize, v_m: f64) -> RateEval {
        if v_m < 0.0 {
            self.clamp(exp_rate(self.tau_down[i - 1], -v_m / self.v_down[i - 1]))
        } else {
            RateEval {
                value: 0.0,
                clamped: false,
            }
        }
    }

    /// Exit rate from state `i`. Only one direction is ever active for a
    /// given sign of `v_m`.
    pub(crate) fn exit_rate_unchecked(&self, i: usize, v_m: f64) -> f64 {
        if v_m > 0.0 && i + 1 < self.num_states() {
            self.up_unchecked(i, v_m).value
        } else if v_m < 0.0 && i > 0 {
            self.down_unchecked(i, v_m).value
        } else {
            0.0
        }
    }

    /// Target state of the only transition that can fire out of `i` at `v_m`.
    pub(crate) fn active_target(&self, i: usize, v_m: f64) -> Option<usize> {
        if v_m > 0.0 && i + 1 < self.num_states() {
            Some(i + 1)
        } else if v_m < 0.0 && i > 0 {
            Some(i - 1)
        } else {
            None
        }
    }

    fn clamp(&self, raw: f64) -> RateEval {
        if raw > self.rate_ceiling || raw.is_nan() {
            RateEval {
                value: self.rate_ceiling,
                clamped: true,
            }
        } else {
            RateEval {
                value: raw,
                clamped: false,
            }
        }
    }
}

// exp(x) / tau; inf when exp overflows, 0 for tau = inf.
fn exp_rate(tau: f64, x: f64) -> f64 {
    if tau.is_infinite() {
        return 0.0;
    }
    x.exp() / tau
}

fn check_positive(field: &'static str, values: &[f64], allow_inf: bool) -> Result<(), DeviceError> {
    for (index, &value) in values.iter().enumerate() {
        let ok = value > 0.0 && (value.is_finite() || (allow_inf && value == f64::INFINITY));
        if !ok {
            return Err(DeviceError::NonPositive {
                field,
                index,
                value,
            });
        }
    }
    Ok(())
}
