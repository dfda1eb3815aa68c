//! Finite-volume solver for the master equation of the series circuit.
//!
//! The joint density `p_i(q, t)` of device state `i` and capacitor charge `q`
//! obeys, for every state,
//!
//! `dp_i/dt + d/dq [ (V(t) - q/C)/R_i p_i ] = sum_j gamma_{j->i} p_j - gamma_{i->*} p_i`.
//!
//! Each step advects every state with a conservative first-order upwind
//! scheme and then applies the reaction coupling cell by cell (Lie
//! splitting). Binary devices use the exact two-state exponential; larger
//! ladders use an explicit update with `rate * dt <= 0.5`.

use thiserror::Error;

use crate::analytic::Density1D;
use crate::circuit::SeriesCircuit;

/// Largest admissible advective Courant number.
pub const MAX_CFL: f64 = 0.9;
/// Largest admissible `rate * dt` in the reaction substep.
pub const MAX_RATE_DT: f64 = 0.5;
/// Boundary outflow above this mass aborts a run.
pub const MAX_BOUNDARY_LOSS: f64 = 1e-6;
/// Fraction of the admissible step used by [`run`].
const STEP_SAFETY: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("drift points outward at the {edge} boundary (t in [{t0:e}, {t1:e}] s)")]
    OutwardDrift {
        edge: &'static str,
        t0: f64,
        t1: f64,
    },
    #[error("time step {dt:e} s exceeds the admissible {admissible:e} s")]
    StepTooLarge { dt: f64, admissible: f64 },
    #[error("{lost:e} of probability mass left the grid by t = {time:e} s")]
    BoundaryLoss { lost: f64, time: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Uniform partition of `[q_min, q_max]` into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeGrid {
    q_min: f64,
    q_max: f64,
    n_cells: usize,
}

impl ChargeGrid {
    pub fn new(q_min: f64, q_max: f64, n_cells: usize) -> Result<Self, PdeError> {
        if !(q_min.is_finite() && q_max.is_finite() && q_max > q_min) {
            return Err(PdeError::InvalidGrid(format!(
                "need finite q_max > q_min, got [{q_min:e}, {q_max:e}]"
            )));
        }
        if n_cells < 8 {
            return Err(PdeError::InvalidGrid(format!(
                "need at least 8 cells, got {n_cells}"
            )));
        }
        Ok(Self {
            q_min,
            q_max,
            n_cells,
        })
    }

    /// Bounds `[min(0, q_lo, C V_min) - 0.1 C V_max, max(q_hi, C V_max) + 0.1 C V_max]`
    /// with `V_max = max |V|` over `[0, t_end]`, which keep the drift inward
    /// at both edges for initial mass inside `[q_lo, q_hi]`.
    pub fn for_circuit(
        circuit: &SeriesCircuit,
        initial_support: (f64, f64),
        t_end: f64,
        n_cells: usize,
    ) -> Result<Self, PdeError> {
        let c = circuit.capacitance;
        let (vmin, vmax) = circuit.waveform.range(0.0, t_end);
        let scale = vmin.abs().max(vmax.abs());
        let pad = if scale > 0.0 {
            0.1 * c * scale
        } else {
            0.1 * (initial_support.1 - initial_support.0).abs().max(c)
        };
        let lo = 0f64.min(initial_support.0).min(c * vmin) - pad;
        let hi = initial_support.1.max(c * vmax) + pad;
        let grid = Self::new(lo, hi, n_cells)?;
        grid.check_inward(circuit, 0.0, t_end)?;
        Ok(grid)
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_cells as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.q_min + (k as f64 + 0.5) * self.dq()
    }

    /// Left edge of cell `k`; `face(n_cells)` is `q_max`.
    pub fn face(&self, k: usize) -> f64 {
        if k == self.n_cells {
            self.q_max
        } else {
            self.q_min + k as f64 * self.dq()
        }
    }

    /// Index of the cell containing `q`, if any. The right edge belongs to
    /// the last cell.
    pub fn cell_of(&self, q: f64) -> Option<usize> {
        if !(q >= self.q_min && q <= self.q_max) {
            return None;
        }
        let k = ((q - self.q_min) / self.dq()).floor() as usize;
        Some(k.min(self.n_cells - 1))
    }

    /// Verifies that `(V(t) - q/C)` points into the grid at both edges for
    /// every `t` in `[t0, t1]`.
    pub fn check_inward(&self, circuit: &SeriesCircuit, t0: f64, t1: f64) -> Result<(), PdeError> {
        let c = circuit.capacitance;
        let (vmin, vmax) = circuit.waveform.range(t0, t1);
        if self.q_min > c * vmin {
            return Err(PdeError::OutwardDrift {
                edge: "lower",
                t0,
                t1,
            });
        }
        if self.q_max < c * vmax {
            return Err(PdeError::OutwardDrift {
                edge: "upper",
                t0,
                t1,
            });
        }
        Ok(())
    }
}

/// Cell-averaged densities of every state on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    grid: ChargeGrid,
    /// `data[i * n + k]` is the density of state `i` in cell `k`.
    data: Vec<f64>,
    states: usize,
    time: f64,
    boundary_loss: f64,
}

impl DistributionField {
    pub fn zeros(grid: ChargeGrid, states: usize, time: f64) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.n_cells * states],
            states,
            time,
            boundary_loss: 0.0,
        }
    }

    /// Cell averages of one density per state. Point masses are deposited
    /// into the containing cell; mass outside the grid is an error.
    pub fn from_densities(
        grid: ChargeGrid,
        densities: &[Density1D],
        time: f64,
    ) -> Result<Self, PdeError> {
        if densities.len() < 2 {
            return Err(PdeError::InvalidInput(format!(
                "need a density per state (at least 2), got {}",
                densities.len()
            )));
        }
        let mut field = Self::zeros(grid, densities.len(), time);
        for (i, d) in densities.iter().enumerate() {
            field.deposit(i, d)?;
        }
        Ok(field)
    }

    /// Point mass of unit weight at charge `q0` in state `state`.
    pub fn point_mass(
        grid: ChargeGrid,
        states: usize,
        state: usize,
        q0: f64,
        time: f64,
    ) -> Result<Self, PdeError> {
        if state >= states {
            return Err(PdeError::InvalidInput(format!(
                "state {state} out of range for {states} states"
            )));
        }
        let mut field = Self::zeros(grid, states, time);
        field.deposit(state, &Density1D::delta(q0, 1.0))?;
        Ok(field)
    }

    fn deposit(&mut self, i: usize, d: &Density1D) -> Result<(), PdeError> {
        let dq = self.grid.dq();
        let n = self.grid.n_cells;
        match d {
            Density1D::Delta { location, weight } => {
                let k = self.grid.cell_of(*location).ok_or_else(|| {
                    PdeError::InvalidInput(format!(
                        "point mass at {location:e} C lies outside the grid"
                    ))
                })?;
                self.data[i * n + k] += weight / dq;
            }
            Density1D::Continuous { support, .. } => {
                if support.0 < self.grid.q_min || support.1 > self.grid.q_max {
                    return Err(PdeError::InvalidInput(format!(
                        "density support [{:e}, {:e}] exceeds the grid",
                        support.0, support.1
                    )));
                }
                let first = self.grid.cell_of(support.0).unwrap_or(0);
                let last = self.grid.cell_of(support.1).unwrap_or(n - 1);
                for k in first..=last {
                    let m = d.mass_between(self.grid.face(k), self.grid.face(k + 1));
                    self.data[i * n + k] += m.max(0.0) / dq;
                }
            }
            Density1D::Mixture(parts) => {
                for p in parts {
                    self.deposit(i, p)?;
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &ChargeGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Cumulative mass that has left through the grid edges.
    pub fn boundary_loss(&self) -> f64 {
        self.boundary_loss
    }

    /// Cell-averaged densities of state `i`, in 1/C.
    pub fn density(&self, i: usize) -> &[f64] {
        let n = self.grid.n_cells;
        &self.data[i * n..(i + 1) * n]
    }

    /// Probability of state `i`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.density(i).iter().sum::<f64>() * self.grid.dq()
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.states).map(|i| self.marginal(i)).collect()
    }

    pub fn mass(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.dq()
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean and variance of `q` conditioned on state `i`; `NaN` if the
    /// state is empty.
    pub fn conditional_moments(&self, i: usize) -> (f64, f64) {
        let p = self.density(i);
        let total: f64 = p.iter().sum();
        if total <= 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let mean = p
            .iter()
            .enumerate()
            .map(|(k, v)| v * self.grid.center(k))
            .sum::<f64>()
            / total;
        let var = p
            .iter()
            .enumerate()
            .map(|(k, v)| v * (self.grid.center(k) - mean).powi(2))
            .sum::<f64>()
            / total;
        (mean, var)
    }

    /// `sum_k |p_i,k - avg_k(f)| dq`, with exact cell averages of `f`.
    pub fn l1_error(&self, i: usize, reference: &Density1D) -> f64 {
        let dq = self.grid.dq();
        self.density(i)
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let m = reference.mass_between(self.grid.face(k), self.grid.face(k + 1));
                (v * dq - m).abs()
            })
            .sum()
    }
}

/// Charge velocity of state `i`: `(V(t) - q/C) / R_i`.
pub fn drift_velocity(circuit: &SeriesCircuit, i: usize, q: f64, t: f64) -> f64 {
    circuit.drift(i, q, t)
}

fn check_field(field: &DistributionField, circuit: &SeriesCircuit) -> Result<(), PdeError> {
    if field.states != circuit.model.num_states() {
        return Err(PdeError::InvalidInput(format!(
            "field has {} states, device has {}",
            field.states,
            circuit.model.num_states()
        )));
    }
    Ok(())
}

/// Largest step satisfying both stability limits, evaluated at time `t`.
pub fn admissible_dt(field: &DistributionField, circuit: &SeriesCircuit, t: f64) -> f64 {
    let g = &field.grid;
    let model = &circuit.model;
    let v = circuit.waveform.value(t);
    let c = circuit.capacitance;
    // drift is monotone in q, so the extremes sit at the outer faces
    let vm_edge = (v - g.q_min / c).abs().max((v - g.q_max / c).abs());
    let r_min = model
        .resistances()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let vmax = vm_edge / r_min;
    let mut rmax = 0f64;
    for i in 0..field.states {
        for vm in [v - g.center(0) / c, v - g.center(g.n_cells - 1) / c] {
            rmax = rmax.max(model.exit_rate_unchecked(i, vm));
        }
    }
    let adv = if vmax > 0.0 {
        MAX_CFL * g.dq() / vmax
    } else {
        f64::INFINITY
    };
    let rea = if rmax > 0.0 {
        MAX_RATE_DT / rmax
    } else {
        f64::INFINITY
    };
    adv.min(rea)
}

/// One advection-then-reaction step of length `dt`.
pub fn step(
    field: &DistributionField,
    dt: f64,
    circuit: &SeriesCircuit,
) -> Result<DistributionField, PdeError> {
    let mut out = field.clone();
    let mut scratch = Vec::new();
    step_in_place(&mut out, dt, circuit, &mut scratch)?;
    Ok(out)
}

fn step_in_place(
    field: &mut DistributionField,
    dt: f64,
    circuit: &SeriesCircuit,
    flux: &mut Vec<f64>,
) -> Result<(), PdeError> {
    check_field(field, circuit)?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(PdeError::InvalidInput(format!(
            "dt must be non-negative, got {dt}"
        )));
    }
    if dt == 0.0 {
        return Ok(());
    }
    let t_mid = field.time + 0.5 * dt;
    // the rate maximum over the grid is attained at the outer cells, and the
    // drift is largest at the outer faces; check both ends of the step
    let admissible = admissible_dt(field, circuit, t_mid)
        .min(admissible_dt(field, circuit, field.time))
        .min(admissible_dt(field, circuit, field.time + dt));
    if dt > admissible {
        return Err(PdeError::StepTooLarge { dt, admissible });
    }
    advect(field, dt, t_mid, circuit, flux);
    react(field, dt, t_mid, circuit);
    field.time += dt;
    Ok(())
}

fn advect(
    field: &mut DistributionField,
    dt: f64,
    t: f64,
    circuit: &SeriesCircuit,
    flux: &mut Vec<f64>,
) {
    let g = field.grid;
    let n = g.n_cells;
    let dq = g.dq();
    let ratio = dt / dq;
    flux.resize(n + 1, 0.0);
    let mut lost = 0.0;
    for i in 0..field.states {
        let p = &mut field.data[i * n..(i + 1) * n];
        for (f, slot) in flux.iter_mut().enumerate() {
            let v = circuit.drift(i, g.face(f), t);
            let upwind = if v > 0.0 {
                if f == 0 {
                    0.0
                } else {
                    p[f - 1]
                }
            } else if f == n {
                0.0
            } else {
                p[f]
            };
            *slot = v * upwind;
        }
        lost += (flux[n].max(0.0) - flux[0].min(0.0)) * dt;
        for k in 0..n {
            p[k] -= ratio * (flux[k + 1] - flux[k]);
        }
    }
    field.boundary_loss += lost;
}

fn react(field: &mut DistributionField, dt: f64, t: f64, circuit: &SeriesCircuit) {
    let g = field.grid;
    let n = g.n_cells;
    let model = &circuit.model;
    let c = circuit.capacitance;
    let v = circuit.waveform.value(t);
    if field.states == 2 {
        let (lo, hi) = field.data.split_at_mut(n);
        for k in 0..n {
            let vm = v - g.center(k) / c;
            let a = model.up_unchecked(0, vm).value;
            let b = model.down_unchecked(1, vm).value;
            let s = a + b;
            if s == 0.0 {
                continue;
            }
            let (p0, p1) = (lo[k], hi[k]);
            let decay = (-s * dt).exp();
            let gone = -(-s * dt).exp_m1();
            lo[k] = p0 * (b + a * decay) / s + p1 * b * gone / s;
            hi[k] = p1 * (a + b * decay) / s + p0 * a * gone / s;
        }
        return;
    }
    let states = field.states;
    let mut moved = vec![0.0; states];
    for k in 0..n {
        let vm = v - g.center(k) / c;
        moved.iter_mut().for_each(|m| *m = 0.0);
        for i in 0..states {
            if let Some(j) = model.active_target(i, vm) {
                let rate = model.exit_rate_unchecked(i, vm);
                let m = rate * dt * field.data[i * n + k];
                moved[i] -= m;
                moved[j] += m;
            }
        }
        for i in 0..states {
            field.data[i * n + k] += moved[i];
        }
    }
}

/// Statistics of a field at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSample {
    pub time: f64,
    pub marginals: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub mass: f64,
}

impl PdeSample {
    fn of(field: &DistributionField) -> Self {
        let (means, variances) = (0..field.states)
            .map(|i| field.conditional_moments(i))
            .unzip();
        Self {
            time: field.time,
            marginals: field.marginals(),
            means,
            variances,
            mass: field.mass(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub samples: Vec<PdeSample>,
    /// Fields at the output times, when requested.
    pub snapshots: Vec<DistributionField>,
    pub final_field: DistributionField,
    /// Largest `|mass - 1|` over every internal step.
    pub max_mass_error: f64,
    /// Smallest cell value over every internal step.
    pub min_cell: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Upper bound on the internal step, seconds.
    pub max_dt: f64,
    pub keep_snapshots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_dt: f64::INFINITY,
            keep_snapshots: false,
        }
    }
}

/// Integrates from the field's time through every entry of `output_times`
/// (sorted, not before the start), landing exactly on each.
pub fn run(
    initial: DistributionField,
    output_times: &[f64],
    circuit: &SeriesCircuit,
    options: RunOptions,
) -> Result<PdeRun, PdeError> {
    check_field(&initial, circuit)?;
    if output_times.windows(2).any(|w| w[1] < w[0])
        || output_times.first().is_some_and(|&t| t < initial.time)
    {
        return Err(PdeError::InvalidInput(
            "output times must be sorted and not precede the initial time".into(),
        ));
    }
    if let Some(&t_end) = output_times.last() {
        initial.grid.check_inward(circuit, initial.time, t_end)?;
    }
    if !(options.max_dt > 0.0) {
        return Err(PdeError::InvalidInput("max_dt must be positive".into()));
    }
    let mut field = initial;
    let mut flux = Vec::new();
    let mut samples = Vec::with_capacity(output_times.len());
    let mut snapshots = Vec::new();
    let mut max_mass_error = (field.mass() - 1.0).abs();
    let mut min_cell = field.min_value();
    let mut steps = 0;
    for &target in output_times {
        while field.time < target {
            let remaining = target - field.time;
            let mut dt = (STEP_SAFETY * admissible_dt(&field, circuit, field.time))
                .min(options.max_dt)
                .min(remaining);
            // land exactly on the target instead of leaving a sliver
            if remaining - dt < 1e-9 * dt {
                dt = remaining;
            }
            loop {
                match step_in_place(&mut field, dt, circuit, &mut flux) {
                    Ok(()) => break,
                    Err(PdeError::StepTooLarge { .. }) if dt > 1e-300 => dt *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            if dt == remaining {
                field.time = target;
            }
            steps += 1;
            max_mass_error = max_mass_error.max((field.mass() + field.boundary_loss - 1.0).abs());
            min_cell = min_cell.min(field.min_value());
            if field.boundary_loss > MAX_BOUNDARY_LOSS {
                return Err(PdeError::BoundaryLoss {
                    lost: field.boundary_loss,
                    time: field.time,
                });
            }
        }
        samples.push(PdeSample::of(&field));
        if options.keep_snapshots {
            snapshots.push(field.clone());
        }
    }
    Ok(PdeRun {
        samples,
        snapshots,
        final_field: field,
        max_mass_error,
        min_cell,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Waveform;
    use crate::device::MemristorModel;
    use proptest::prelude::*;

    fn reference_circuit() -> SeriesCircuit {
        let model = MemristorModel::binary(1e5, 1e4, 3e5, 0.02, 3e5, 0.02).unwrap();
        SeriesCircuit::new(model, 1e-6, Waveform::Constant(0.35))
    }

    fn frozen_circuit() -> SeriesCircuit {
        let model =
            MemristorModel::binary(1e5, 1e4, f64::INFINITY, 0.02, f64::INFINITY, 0.02).unwrap();
        SeriesCircuit::new(model, 1e-6, Waveform::Constant(0.35))
    }

    #[test]
    fn drift_examples() {
        let c = reference_circuit();
        assert!((drift_velocity(&c, 0, 0.0, 0.3) - 3.5e-6).abs() < 1e-18);
        assert!((drift_velocity(&c, 1, 0.0, 0.0) - 35e-6).abs() < 1e-18);
        assert!(drift_velocity(&c, 0, 0.35e-6, 1.0).abs() < 1e-18);
    }

    #[test]
    fn grid_validation() {
        assert!(ChargeGrid::new(0.0, 1.0, 7).is_err());
        assert!(ChargeGrid::new(1.0, 1.0, 8).is_err());
        let g = ChargeGrid::new(0.0, 1.0, 10).unwrap();
        assert_eq!(g.cell_of(1.0), Some(9));
        assert_eq!(g.cell_of(0.05), Some(0));
        assert_eq!(g.cell_of(-0.1), None);
        let c = reference_circuit();
        let bad = ChargeGrid::new(0.0, 0.3e-6, 100).unwrap();
        assert!(matches!(
            bad.check_inward(&c, 0.0, 1.0),
            Err(PdeError::OutwardDrift { edge: "upper", .. })
        ));
        let g = ChargeGrid::for_circuit(&c, (0.0, 0.0), 0.03, 100).unwrap();
        assert!((g.q_min() + 0.035e-6).abs() < 1e-20);
        assert!((g.q_max() - 0.385e-6).abs() < 1e-20);
    }

    #[test]
    fn zero_step_is_identity() {
        let c = reference_circuit();
        let g = ChargeGrid::for_circuit(&c, (0.0, 1e-7), 0.03, 200).unwrap();
        let f = DistributionField::from_densities(
            g,
            &[Density1D::uniform(0.0, 1e-7), Density1D::zero()],
            0.0,
        )
        .unwrap();
        assert_eq!(step(&f, 0.0, &c).unwrap(), f);
    }

    #[test]
    fn oversized_step_refused_with_admissible_value() {
        let c = reference_circuit();
        let g = ChargeGrid::for_circuit(&c, (0.0, 0.0), 0.03, 200).unwrap();
        let f = DistributionField::point_mass(g, 2, 0, 0.0, 0.0).unwrap();
        match step(&f, 1e-3, &c) {
            Err(PdeError::StepTooLarge { dt, admissible }) => {
                assert_eq!(dt, 1e-3);
                assert!(admissible < 1e-3);
                assert!(step(&f, admissible, &c).is_ok());
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn frozen_rates_keep_marginals() {
        let c = frozen_circuit();
        let g = ChargeGrid::for_circuit(&c, (0.0, 1e-7), 0.05, 400).unwrap();
        let f = DistributionField::from_densities(
            g,
            &[
                Density1D::Continuous {
                    pdf: std::sync::Arc::new(|_| 0.3e7),
                    support: (0.0, 1e-7),
                },
                Density1D::from_fn(0.0, 1e-7, |_| 0.7e7),
            ],
            0.0,
        )
        .unwrap();
        let out = run(f, &[0.01, 0.05], &c, RunOptions::default()).unwrap();
        for s in &out.samples {
            assert!((s.marginals[0] - 0.3).abs() < 1e-12);
            assert!((s.marginals[1] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_resistance_gives_two_state_relaxation() {
        // negligible drift; constant memristor voltage 0.35 V in every cell
        // that matters, so the marginals follow the two-state ODE
        let model = MemristorModel::binary(1e30, 1e30, 3e5, 0.02, 3e5, 0.02).unwrap();
        let c = SeriesCircuit::new(model, 1e-6, Waveform::Constant(0.35));
        let g = ChargeGrid::new(-1e-9, 0.35e-6 + 1e-9, 64).unwrap();
        let f = DistributionField::point_mass(g, 2, 0, 0.0, 0.0).unwrap();
        let t = 0.004;
        let out = run(f, &[t], &c, RunOptions::default()).unwrap();
        let vm = 0.35 - g.center(g.cell_of(0.0).unwrap()) / 1e-6;
        let rate = (vm / 0.02).exp() / 3e5;
        let p0 = (-rate * t).exp();
        assert!((out.samples[0].marginals[0] - p0).abs() < 1e-12);
    }

    #[test]
    fn binary_pde_matches_closed_form_on_fine_grid() {
        use crate::analytic::{p0_constant_voltage, ConstantDriveParams};
        let c = reference_circuit();
        let g = ChargeGrid::for_circuit(&c, (0.0, 0.0), 0.03, 1000).unwrap();
        let f = DistributionField::point_mass(g, 2, 0, 0.0, 0.0).unwrap();
        let times: Vec<f64> = (1..=10).map(|k| 0.003 * k as f64).collect();
        let out = run(f, &times, &c, RunOptions::default()).unwrap();
        let p = ConstantDriveParams::reference_case();
        let tol = (2.0 * g.dq() / (1e-6 * 0.02)).max(1e-3);
        for s in &out.samples {
            let exact = p0_constant_voltage(&p, s.time).unwrap();
            assert!((s.marginals[0] - exact).abs() < tol, "t={}", s.time);
        }
        assert!(out.max_mass_error < 1e-8);
        assert!(out.min_cell >= 0.0);
    }

    #[test]
    fn ladder_transfers_mass_upward() {
        let model = MemristorModel::uniform(vec![1e5, 5e4, 1e4], 3e5, 0.02, 3e5, 0.02).unwrap();
        let c = SeriesCircuit::new(model, 1e-6, Waveform::Constant(0.35));
        let g = ChargeGrid::for_circuit(&c, (0.0, 0.0), 0.05, 300).unwrap();
        let f = DistributionField::point_mass(g, 3, 0, 0.0, 0.0).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| 0.0025 * k as f64).collect();
        let out = run(f, &times, &c, RunOptions::default()).unwrap();
        let mut last = 0.0;
        for s in &out.samples {
            assert!(s.marginals[2] >= last - 1e-15);
            last = s.marginals[2];
            assert!((s.marginals.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
        assert!(last > 0.0);
        assert!(out.min_cell >= 0.0);
    }

    #[test]
    fn outflow_is_detected() {
        let c = reference_circuit();
        let g = ChargeGrid::new(-0.05e-6, 0.2e-6, 100).unwrap();
        let f = DistributionField::point_mass(g, 2, 0, 0.0, 0.0).unwrap();
        assert!(matches!(
            run(f, &[0.03], &c, RunOptions::default()),
            Err(PdeError::OutwardDrift { .. })
        ));
    }

    proptest! {
        #[test]
        fn steps_conserve_mass_and_positivity(
            va in 0.05f64..0.5,
            lo in 0.0f64..0.1,
            width in 0.01f64..0.1,
            frac in 0.1f64..1.0,
        ) {
            let model = MemristorModel::binary(1e5, 1e4, 3e5, 0.02, 3e5, 0.02).unwrap();
            let c = SeriesCircuit::new(model, 1e-6, Waveform::Constant(va));
            let (a, b) = (lo * 1e-6, (lo + width) * 1e-6);
            let g = ChargeGrid::for_circuit(&c, (a, b), 1.0, 64).unwrap();
            let mut f = DistributionField::from_densities(
                g, &[Density1D::uniform(a, b), Density1D::zero()], 0.0).unwrap();
            for _ in 0..20 {
                let dt = frac * admissible_dt(&f, &c, f.time());
                f = step(&f, dt, &c).unwrap();
                prop_assert!(f.min_value() >= 0.0);
                prop_assert!((f.mass() - 1.0).abs() < 1e-10);
            }
        }
    }
}
