//! Parallel ensembles of independent trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::trajectory::{simulate_with_rng, TrajectoryRecord};
use super::McError;
use crate::circuit::{CircuitState, Netlist};

/// Generator of trajectory `index` in an ensemble with `master_seed`:
/// the ChaCha stream `index` of the key derived from `master_seed`, so any
/// trajectory can be regenerated on its own.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Charge histogram of one capacitor, split by the state of one memristor.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub memristor: usize,
    pub capacitor: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn bin_width(&self) -> f64 {
        (self.q_max - self.q_min) / self.bins as f64
    }

    fn bin_of(&self, q: f64) -> Option<usize> {
        if !(q >= self.q_min && q <= self.q_max) {
            return None;
        }
        let b = ((q - self.q_min) / self.bin_width()).floor() as usize;
        Some(b.min(self.bins - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub t_end: f64,
    /// Sorted, inside `[initial time, t_end]`.
    pub output_times: Vec<f64>,
    pub trajectories: usize,
    pub master_seed: u64,
    pub histogram: Option<HistogramSpec>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub requested: usize,
    /// Trajectories that completed; every estimate below uses this count.
    pub n: usize,
    /// `counts[m][i][k]`: trajectories with memristor `m` in state `i` at
    /// output time `k`.
    pub counts: Vec<Vec<Vec<u64>>>,
    /// Occupation estimates `counts / n`, same indexing.
    pub occupation: Vec<Vec<Vec<f64>>>,
    /// `sqrt(p (1 - p) / n)`, same indexing.
    pub stderr: Vec<Vec<Vec<f64>>>,
    /// `histograms[k][i][b]`: counts of charge bin `b` in state `i` at
    /// output time `k`, when requested.
    pub histograms: Option<Vec<Vec<Vec<u64>>>>,
    /// Charges that fell outside the histogram range.
    pub histogram_overflow: u64,
    /// Time of the first event of each completed trajectory, in index order.
    pub first_switch_times: Vec<Option<f64>>,
    pub up_events: u64,
    pub down_events: u64,
    /// Failed trajectories by index; they are excluded, never retried.
    pub failures: Vec<(usize, McError)>,
}

impl EnsembleStats {
    pub fn failure_fraction(&self) -> f64 {
        self.failures.len() as f64 / self.requested as f64
    }

    /// Occupation of state `i` of memristor `m` over the output times.
    pub fn occupation_series(&self, m: usize, i: usize) -> &[f64] {
        &self.occupation[m][i]
    }

    /// Mean and standard error of the first switching time over the
    /// trajectories that switched.
    pub fn mean_first_switch_time(&self) -> Option<(f64, f64)> {
        let times: Vec<f64> = self.first_switch_times.iter().flatten().copied().collect();
        if times.is_empty() {
            return None;
        }
        let n = times.len() as f64;
        let mean = times.iter().sum::<f64>() / n;
        let var = if times.len() > 1 {
            times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some((mean, (var / n).sqrt()))
    }

    /// Histogram at output `k`, state `i`, as a partial density in 1/C
    /// (integrates to the occupation of `i`).
    pub fn histogram_density(&self, spec: &HistogramSpec, k: usize, i: usize) -> Option<Vec<f64>> {
        let h = self.histograms.as_ref()?;
        let scale = 1.0 / (self.n as f64 * spec.bin_width());
        Some(h[k][i].iter().map(|&c| c as f64 * scale).collect())
    }
}

struct Summary {
    states: Vec<Vec<usize>>,
    charge: Vec<Option<f64>>,
    first_switch: Option<f64>,
    up: u64,
    down: u64,
}

fn summarize(rec: TrajectoryRecord, hist: Option<&HistogramSpec>) -> Summary {
    let mut up = 0;
    let mut down = 0;
    for e in &rec.events {
        if e.to > e.from {
            up += 1;
        } else {
            down += 1;
        }
    }
    Summary {
        charge: rec
            .samples
            .iter()
            .map(|s| hist.map(|h| s.capacitor_charges[h.capacitor]))
            .collect(),
        states: rec
            .samples
            .into_iter()
            .map(|s| s.memristor_states)
            .collect(),
        first_switch: rec.events.first().map(|e| e.time),
        up,
        down,
    }
}

/// Runs `config.trajectories` independent realizations in parallel and
/// reduces them in index order, so the result does not depend on the number
/// of threads.
pub fn run_ensemble(
    netlist: &Netlist,
    initial: &CircuitState,
    config: &EnsembleConfig,
) -> Result<EnsembleStats, McError> {
    if config.trajectories == 0 {
        return Err(McError::InvalidInput("need at least one trajectory".into()));
    }
    netlist
        .check_state(initial)
        .map_err(McError::InvalidState)?;
    if let Some(h) = &config.histogram {
        if h.bins == 0 || !(h.q_max > h.q_min) {
            return Err(McError::InvalidInput(
                "histogram needs bins > 0 and q_max > q_min".into(),
            ));
        }
        if h.memristor >= initial.memristor_states.len()
            || h.capacitor >= initial.capacitor_charges.len()
        {
            return Err(McError::InvalidInput(
                "histogram refers to a missing element".into(),
            ));
        }
    }
    let work = || {
        (0..config.trajectories)
            .into_par_iter()
            .map(|idx| {
                let mut rng = trajectory_rng(config.master_seed, idx as u64);
                simulate_with_rng(
                    netlist,
                    initial,
                    config.t_end,
                    &config.output_times,
                    &mut rng,
                )
                .map(|rec| summarize(rec, config.histogram.as_ref()))
            })
            .collect::<Vec<_>>()
    };
    let results = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| McError::InvalidInput(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(reduce(netlist, config, results))
}

fn reduce(
    netlist: &Netlist,
    config: &EnsembleConfig,
    results: Vec<Result<Summary, McError>>,
) -> EnsembleStats {
    let n_times = config.output_times.len();
    let n_mem = netlist.memristor_indices().len();
    let levels: Vec<usize> = (0..n_mem)
        .map(|m| netlist.memristor_model(m).num_states())
        .collect();
    let mut counts: Vec<Vec<Vec<u64>>> =
        levels.iter().map(|&g| vec![vec![0; n_times]; g]).collect();
    let mut histograms = config
        .histogram
        .as_ref()
        .map(|h| vec![vec![vec![0u64; h.bins]; levels[h.memristor]]; n_times]);
    let mut overflow = 0;
    let mut first_switch_times = Vec::new();
    let mut failures = Vec::new();
    let (mut up_events, mut down_events) = (0, 0);
    let mut n = 0usize;
    for (idx, res) in results.into_iter().enumerate() {
        let s = match res {
            Ok(s) => s,
            Err(e) => {
                failures.push((idx, e));
                continue;
            }
        };
        n += 1;
        for (k, states) in s.states.iter().enumerate() {
            for (m, &i) in states.iter().enumerate() {
                counts[m][i][k] += 1;
            }
        }
        if let (Some(h), Some(spec)) = (histograms.as_mut(), config.histogram.as_ref()) {
            for (k, q) in s.charge.iter().enumerate() {
                let q = q.expect("charge recorded when histogram requested");
                let i = s.states[k][spec.memristor];
                match spec.bin_of(q) {
                    Some(b) => h[k][i][b] += 1,
                    None => overflow += 1,
                }
            }
        }
        first_switch_times.push(s.first_switch);
        up_events += s.up;
        down_events += s.down;
    }
    let nf = n as f64;
    let occupation: Vec<Vec<Vec<f64>>> = counts
        .iter()
        .map(|per_state| {
            let g = per_state.len();
            let mut out: Vec<Vec<f64>> = vec![vec![0.0; n_times]; g];
            for k in 0..n_times {
                if n == 0 {
                    out.iter_mut().for_each(|o| o[k] = f64::NAN);
                    continue;
                }
                let mut partial = 0.0;
                for i in 0..g - 1 {
                    out[i][k] = per_state[i][k] as f64 / nf;
                    partial += out[i][k];
                }
                // complement keeps the row sum at exactly one
                out[g - 1][k] = 1.0 - partial;
            }
            out
        })
        .collect();
    let stderr = occupation
        .iter()
        .map(|per_state| {
            per_state
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&p| (p * (1.0 - p) / nf).max(0.0).sqrt())
                        .collect()
                })
                .collect()
        })
        .collect();
    EnsembleStats {
        times: config.output_times.clone(),
        requested: config.trajectories,
        n,
        counts,
        occupation,
        stderr,
        histograms,
        histogram_overflow: overflow,
        first_switch_times,
        up_events,
        down_events,
        failures,
    }
}
