//! Exact sampling of single realizations.
//!
//! Between switches the circuit is a linear RC network whose capacitor
//! charges follow `dq/dt = i_C(q, t)`. Every memristor carries its own
//! standard-exponential threshold and accumulates hazard
//! `int gamma(V_M(s)) ds`; the first device to reach its threshold switches
//! by one level, gets a fresh threshold, and the network is re-solved.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::hazard::{hazard_accumulate, HazardOutcome};
use super::McError;
use crate::circuit::mna::LinearResponse;
use crate::circuit::{CircuitState, Netlist};
use crate::quad::{integrate_with_breaks, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub time: f64,
    pub memristor: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub memristor_states: Vec<usize>,
    pub capacitor_charges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub events: Vec<SwitchEvent>,
    /// One entry per requested output time.
    pub samples: Vec<TrajectorySample>,
    pub final_state: CircuitState,
}

/// Samples one realization from `initial` to `t_end`, recording the state
/// at each of `output_times` (sorted, inside `[initial.time, t_end]`).
pub fn simulate_trajectory(
    netlist: &Netlist,
    initial: &CircuitState,
    t_end: f64,
    output_times: &[f64],
    seed: u64,
) -> Result<TrajectoryRecord, McError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(netlist, initial, t_end, output_times, &mut rng)
}

/// As [`simulate_trajectory`] with a caller-supplied generator.
pub fn simulate_with_rng<R: Rng>(
    netlist: &Netlist,
    initial: &CircuitState,
    t_end: f64,
    output_times: &[f64],
    rng: &mut R,
) -> Result<TrajectoryRecord, McError> {
    netlist
        .check_state(initial)
        .map_err(McError::InvalidState)?;
    if !(t_end > initial.time && t_end.is_finite()) {
        return Err(McError::InvalidInput(format!(
            "t_end = {t_end} must exceed the initial time {}",
            initial.time
        )));
    }
    if output_times.windows(2).any(|w| w[1] < w[0])
        || output_times
            .iter()
            .any(|&t| !(t >= initial.time && t <= t_end))
    {
        return Err(McError::InvalidInput(
            "output times must be sorted and inside [initial time, t_end]".into(),
        ));
    }
    let mut sim = Simulator::new(netlist, initial, t_end, output_times, rng);
    if sim.fast_path() {
        sim.run_exact()?;
    } else {
        sim.run_ode()?;
    }
    Ok(sim.finish())
}

struct Simulator<'a, R: Rng> {
    netlist: &'a Netlist,
    rng: &'a mut R,
    cache: HashMap<Vec<usize>, LinearResponse>,
    t_end: f64,
    outputs: &'a [f64],
    next_output: usize,
    t: f64,
    states: Vec<usize>,
    charges: Vec<f64>,
    /// Hazard accumulated since each device's threshold was drawn.
    hazard: Vec<f64>,
    thresholds: Vec<f64>,
    events: Vec<SwitchEvent>,
    samples: Vec<TrajectorySample>,
    caps: Vec<f64>,
    n_src: usize,
}

impl<'a, R: Rng> Simulator<'a, R> {
    fn new(
        netlist: &'a Netlist,
        initial: &CircuitState,
        t_end: f64,
        outputs: &'a [f64],
        rng: &'a mut R,
    ) -> Self {
        let n_mem = netlist.memristor_indices().len();
        let thresholds = (0..n_mem).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let caps = (0..netlist.capacitor_indices().len())
            .map(|k| netlist.capacitance(k))
            .collect();
        Self {
            netlist,
            rng,
            cache: HashMap::new(),
            t_end,
            outputs,
            next_output: 0,
            t: initial.time,
            states: initial.memristor_states.clone(),
            charges: initial.capacitor_charges.clone(),
            hazard: vec![0.0; n_mem],
            thresholds,
            events: Vec::new(),
            samples: Vec::with_capacity(outputs.len()),
            caps,
            n_src: netlist.source_indices().len(),
        }
    }

    fn fast_path(&self) -> bool {
        self.caps.len() <= 1
            && (0..self.n_src).all(|s| self.netlist.source_waveform(s).is_constant())
    }

    fn response(&mut self) -> Result<&LinearResponse, McError> {
        if !self.cache.contains_key(&self.states) {
            let lr = LinearResponse::new(self.netlist, &self.states)?;
            self.cache.insert(self.states.clone(), lr);
        }
        Ok(&self.cache[&self.states])
    }

    fn source_volts(&self, t: f64, out: &mut [f64]) {
        for (s, v) in out.iter_mut().enumerate().take(self.n_src) {
            *v = self.netlist.source_waveform(s).value(t);
        }
    }

    /// Records every pending output time strictly before `until` (or at it
    /// when `inclusive`) using the charge law `charge_at`.
    fn record_until(&mut self, until: f64, inclusive: bool, charge_at: &dyn Fn(f64) -> Vec<f64>) {
        while let Some(&t) = self.outputs.get(self.next_output) {
            if t < until || (inclusive && t <= until) {
                self.samples.push(TrajectorySample {
                    time: t,
                    memristor_states: self.states.clone(),
                    capacitor_charges: charge_at(t),
                });
                self.next_output += 1;
            } else {
                break;
            }
        }
    }

    /// Flips memristor `m` according to the sign of its voltage `v`.
    fn switch(&mut self, m: usize, v: f64, time: f64) -> Result<(), McError> {
        let model = self.netlist.memristor_model(m);
        let from = self.states[m];
        let to = model
            .active_target(from, v)
            .ok_or(McError::Stalled { time, memristor: m })?;
        self.states[m] = to;
        self.hazard[m] = 0.0;
        self.thresholds[m] = self.rng.sample(Exp1);
        self.events.push(SwitchEvent {
            time,
            memristor: m,
            from,
            to,
        });
        Ok(())
    }

    /// Constant sources and at most one capacitor: charges relax
    /// exponentially and hazards are inverted directly.
    fn run_exact(&mut self) -> Result<(), McError> {
        let n_mem = self.states.len();
        let n_cap = self.caps.len();
        let mut inputs = vec![0.0; self.n_src + n_cap];
        self.source_volts(self.t, &mut inputs);
        let mut cur = vec![0.0; n_cap];
        let mut volts = vec![0.0; n_mem];
        loop {
            let t0 = self.t;
            let lr = self.response()?.clone();
            // affine response in the capacitor voltage
            let (alpha, beta, mu, nu) = {
                if n_cap == 1 {
                    inputs[self.n_src] = 0.0;
                }
                lr.eval(&inputs, &mut cur, &mut volts);
                let alpha = cur.first().copied().unwrap_or(0.0);
                let mu = volts.clone();
                let (mut beta, mut nu) = (0.0, vec![0.0; n_mem]);
                if n_cap == 1 {
                    inputs[self.n_src] = 1.0;
                    lr.eval(&inputs, &mut cur, &mut volts);
                    beta = cur[0] - alpha;
                    nu = volts.iter().zip(&mu).map(|(v, m)| v - m).collect();
                }
                (alpha, beta, mu, nu)
            };
            let c = self.caps.first().copied().unwrap_or(1.0);
            let q0 = self.charges.first().copied().unwrap_or(0.0);
            let law = ChargeLaw::new(q0, t0, alpha, beta, c);
            let vm = |m: usize, t: f64| mu[m] + nu[m] * law.at(t) / c;

            let mut breaks = Vec::new();
            for m in 0..n_mem {
                if let Some(tz) = law.time_of(-mu[m] * c / nu[m]).filter(|_| nu[m] != 0.0) {
                    if tz > t0 && tz < self.t_end {
                        breaks.push(tz);
                    }
                }
            }

            let mut first: Option<(f64, usize)> = None;
            for m in 0..n_mem {
                let model = self.netlist.memristor_model(m);
                let state = self.states[m];
                let horizon = first.map_or(self.t_end, |(t, _)| t);
                let outcome = hazard_accumulate(
                    |t| model.exit_rate_unchecked(state, vm(m, t)),
                    t0,
                    horizon,
                    self.thresholds[m] - self.hazard[m],
                    &breaks,
                );
                if let HazardOutcome::Switched { time } = outcome {
                    if first.is_none_or(|(tf, _)| time < tf) {
                        first = Some((time, m));
                    }
                }
            }

            let Some((t_ev, m_ev)) = first else {
                let q_law = |t: f64| law.charges(t, n_cap);
                self.record_until(self.t_end, true, &q_law);
                self.t = self.t_end;
                self.charges = law.charges(self.t_end, n_cap);
                return Ok(());
            };
            for m in (0..n_mem).filter(|&m| m != m_ev) {
                let model = self.netlist.memristor_model(m);
                let state = self.states[m];
                let mut rate = |t: f64| model.exit_rate_unchecked(state, vm(m, t));
                self.hazard[m] += integrate_with_breaks(
                    &mut rate,
                    t0,
                    t_ev,
                    &breaks,
                    Tolerance::relative(1e-11).with_abs(1e-14),
                )
                .value;
            }
            let q_law = |t: f64| law.charges(t, n_cap);
            self.record_until(t_ev, false, &q_law);
            let v_ev = vm(m_ev, t_ev);
            self.t = t_ev;
            self.charges = law.charges(t_ev, n_cap);
            self.switch(m_ev, v_ev, t_ev)?;
        }
    }

    /// General networks: adaptive Dormand-Prince integration of charges and
    /// hazards with event location by bisection.
    fn run_ode(&mut self) -> Result<(), McError> {
        let n_cap = self.caps.len();
        let n_mem = self.states.len();
        let mut stops: Vec<f64> = Vec::new();
        for s in 0..self.n_src {
            stops.extend(
                self.netlist
                    .source_waveform(s)
                    .breakpoints(self.t, self.t_end),
            );
        }
        stops.extend(self.outputs.iter().copied());
        stops.push(self.t_end);
        stops.retain(|&s| s > self.t && s <= self.t_end);
        stops.sort_by(f64::total_cmp);
        stops.dedup();

        let vmax: f64 = (0..self.n_src)
            .map(|s| {
                let (lo, hi) = self.netlist.source_waveform(s).range(self.t, self.t_end);
                lo.abs().max(hi.abs())
            })
            .sum();
        let q_scale = self
            .caps
            .iter()
            .map(|c| c * vmax)
            .chain(self.charges.iter().map(|q| q.abs()))
            .fold(0.0, f64::max)
            .max(1e-300);
        let scales = OdeScales {
            atol_q: ODE_RTOL * q_scale,
            n_cap,
        };

        let start = self.charges.clone();
        self.record_until(self.t, true, &|_| start.clone());
        let span = self.t_end - self.t;
        let mut h = span / 100.0;
        let mut y: Vec<f64> = self
            .charges
            .iter()
            .copied()
            .chain(self.hazard.iter().copied())
            .collect();
        let mut ws = Workspace::new(y.len(), self.n_src + n_cap, n_mem);
        for stop in stops {
            while self.t < stop {
                let lr = self.response()?.clone();
                let rhs = Rhs {
                    netlist: self.netlist,
                    lr: &lr,
                    caps: &self.caps,
                    states: &self.states,
                    n_src: self.n_src,
                };
                let rate_now = rhs.total_rate(self.t, &y, &mut ws);
                if rate_now > 0.0 {
                    h = h.min(0.1 / rate_now);
                }
                h = h.min(stop - self.t);
                if h < 1e-15 * span.max(self.t.abs()) && h < stop - self.t {
                    return Err(McError::StepUnderflow { time: self.t });
                }
                let (y_new, err) = rhs.dopri_step(self.t, &y, h, &scales, &mut ws);
                if !(err <= 1.0) {
                    h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
                    if h < 1e-15 * span.max(self.t.abs()) {
                        return Err(McError::StepUnderflow { time: self.t });
                    }
                    continue;
                }
                let fired = (0..n_mem).any(|m| y_new[n_cap + m] >= self.thresholds[m]);
                if !fired {
                    let landed = self.t + h >= stop;
                    self.t = if landed { stop } else { self.t + h };
                    y = y_new;
                    self.sync(&y);
                    if landed {
                        let charges = self.charges.clone();
                        self.record_until(stop, true, &|_| charges.clone());
                    }
                    let grow = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
                    h *= grow.clamp(1.0, 5.0);
                    continue;
                }
                // locate the crossing inside [t, t + h]
                let (mut lo, mut hi) = (0.0, 1.0);
                let mut y_hi = y_new;
                while (hi - lo) * h > EVENT_TOL * span && hi - lo > 1e-15 {
                    let mid = 0.5 * (lo + hi);
                    let (y_mid, _) = rhs.dopri_step(self.t, &y, mid * h, &scales, &mut ws);
                    if (0..n_mem).any(|m| y_mid[n_cap + m] >= self.thresholds[m]) {
                        hi = mid;
                        y_hi = y_mid;
                    } else {
                        lo = mid;
                    }
                }
                let t_ev = self.t + hi * h;
                let m_ev = (0..n_mem)
                    .max_by(|&a, &b| {
                        (y_hi[n_cap + a] - self.thresholds[a])
                            .total_cmp(&(y_hi[n_cap + b] - self.thresholds[b]))
                    })
                    .expect("fired implies a memristor");
                let mut volts = vec![0.0; n_mem];
                rhs.eval(t_ev, &y_hi, &mut ws, None, Some(&mut volts));
                let charges: Vec<f64> = y_hi[..n_cap].to_vec();
                self.record_until(t_ev, false, &|_| charges.clone());
                self.t = t_ev;
                y = y_hi;
                self.sync(&y);
                self.switch(m_ev, volts[m_ev], t_ev)?;
                y[n_cap + m_ev] = 0.0;
            }
        }
        Ok(())
    }

    fn sync(&mut self, y: &[f64]) {
        let n_cap = self.caps.len();
        self.charges.copy_from_slice(&y[..n_cap]);
        self.hazard.copy_from_slice(&y[n_cap..]);
    }

    fn finish(self) -> TrajectoryRecord {
        TrajectoryRecord {
            events: self.events,
            samples: self.samples,
            final_state: CircuitState {
                memristor_states: self.states,
                capacitor_charges: self.charges,
                time: self.t,
            },
        }
    }
}

const ODE_RTOL: f64 = 1e-10;
const HAZARD_ATOL: f64 = 1e-10;
const EVENT_TOL: f64 = 1e-9;

/// `q(t) = q_inf + (q0 - q_inf) e^{k (t - t0)}` with `k = beta / C`, or a
/// linear law when `beta = 0`.
struct ChargeLaw {
    q0: f64,
    t0: f64,
    alpha: f64,
    q_inf: f64,
    k: f64,
}

impl ChargeLaw {
    fn new(q0: f64, t0: f64, alpha: f64, beta: f64, c: f64) -> Self {
        let k = beta / c;
        let q_inf = if beta != 0.0 {
            -alpha * c / beta
        } else {
            f64::NAN
        };
        Self {
            q0,
            t0,
            alpha,
            q_inf,
            k,
        }
    }

    fn at(&self, t: f64) -> f64 {
        if self.k == 0.0 {
            self.q0 + self.alpha * (t - self.t0)
        } else {
            self.q_inf + (self.q0 - self.q_inf) * (self.k * (t - self.t0)).exp()
        }
    }

    fn charges(&self, t: f64, n_cap: usize) -> Vec<f64> {
        if n_cap == 0 {
            Vec::new()
        } else {
            vec![self.at(t)]
        }
    }

    /// Time at which the charge passes `q`, if it ever does.
    fn time_of(&self, q: f64) -> Option<f64> {
        if !q.is_finite() {
            return None;
        }
        if self.k == 0.0 {
            if self.alpha == 0.0 {
                return None;
            }
            let dt = (q - self.q0) / self.alpha;
            return (dt > 0.0).then_some(self.t0 + dt);
        }
        let ratio = (q - self.q_inf) / (self.q0 - self.q_inf);
        if !(ratio > 0.0 && ratio < 1.0) {
            return None;
        }
        let dt = ratio.ln() / self.k;
        (dt > 0.0 && dt.is_finite()).then_some(self.t0 + dt)
    }
}

struct OdeScales {
    atol_q: f64,
    n_cap: usize,
}

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    inputs: Vec<f64>,
    cur: Vec<f64>,
    volts: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, n_in: usize, n_mem: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            inputs: vec![0.0; n_in],
            cur: vec![0.0; n - n_mem],
            volts: vec![0.0; n_mem],
        }
    }
}

struct Rhs<'a> {
    netlist: &'a Netlist,
    lr: &'a LinearResponse,
    caps: &'a [f64],
    states: &'a [usize],
    n_src: usize,
}

// Dormand-Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl Rhs<'_> {
    /// Evaluates the network at `(t, y)`; writes `dy/dt` to `dy` and the
    /// memristor voltages to `volts` when given.
    fn eval(
        &self,
        t: f64,
        y: &[f64],
        ws: &mut Workspace,
        dy: Option<&mut [f64]>,
        volts: Option<&mut [f64]>,
    ) {
        let n_cap = self.caps.len();
        for s in 0..self.n_src {
            ws.inputs[s] = self.netlist.source_waveform(s).value(t);
        }
        for k in 0..n_cap {
            ws.inputs[self.n_src + k] = y[k] / self.caps[k];
        }
        self.lr.eval(&ws.inputs, &mut ws.cur, &mut ws.volts);
        if let Some(dy) = dy {
            dy[..n_cap].copy_from_slice(&ws.cur);
            for (m, &v) in ws.volts.iter().enumerate() {
                dy[n_cap + m] = self
                    .netlist
                    .memristor_model(m)
                    .exit_rate_unchecked(self.states[m], v);
            }
        }
        if let Some(out) = volts {
            out.copy_from_slice(&ws.volts);
        }
    }

    fn total_rate(&self, t: f64, y: &[f64], ws: &mut Workspace) -> f64 {
        let n = y.len();
        let mut dy = vec![0.0; n];
        self.eval(t, y, ws, Some(&mut dy), None);
        dy[self.caps.len()..].iter().sum()
    }

    /// One Dormand-Prince step; returns the 5th-order solution and the
    /// scaled error norm.
    fn dopri_step(
        &self,
        t: f64,
        y: &[f64],
        h: f64,
        scales: &OdeScales,
        ws: &mut Workspace,
    ) -> (Vec<f64>, f64) {
        let n = y.len();
        let mut k = std::mem::take(&mut ws.k);
        for stage in 0..7 {
            let mut tmp = std::mem::take(&mut ws.tmp);
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += h * A[stage][j] * kj[i];
                }
                tmp[i] = acc;
            }
            self.eval(t + C[stage] * h, &tmp, ws, Some(&mut k[stage]), None);
            ws.tmp = tmp;
        }
        let mut y5 = vec![0.0; n];
        let mut err = 0f64;
        for i in 0..n {
            let (mut s5, mut s4) = (0.0, 0.0);
            for j in 0..7 {
                s5 += B5[j] * k[j][i];
                s4 += B4[j] * k[j][i];
            }
            y5[i] = y[i] + h * s5;
            let atol = if i < scales.n_cap {
                scales.atol_q
            } else {
                HAZARD_ATOL
            };
            let sc = atol + ODE_RTOL * y[i].abs().max(y5[i].abs());
            err = err.max((h * (s5 - s4)).abs() / sc);
        }
        ws.k = k;
        (y5, err)
    }
}
