//! TOML run configuration. Every physical quantity is in base SI units.
//!
//! ```toml
//! engine = "compare"          # mc | pde | analytic | compare
//! t_end = 0.03
//! output_interval = 1e-4      # or output_times = [...]
//! output = "p0.csv"           # optional, stdout when absent
//!
//! [series]                    # or netlist = "circuit.net"
//! capacitance = 1e-6
//! resistances = [1e5, 1e4]
//! tau_up = 3e5
//! v_up = 0.02
//! tau_down = 3e5
//! v_down = 0.02
//! voltage = 0.35              # or [series.source]
//!
//! [pde]
//! cells = 2000
//!
//! [mc]
//! trajectories = 10000
//! seed = 1
//! ```

use std::path::{Path, PathBuf};

use memsim::circuit::{parse_netlist, CircuitState, Netlist, SeriesCircuit, Waveform};
use memsim::device::MemristorModel;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Mc,
    Pde,
    Analytic,
    Compare,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Mc => "mc",
            Engine::Pde => "pde",
            Engine::Analytic => "analytic",
            Engine::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    pub t_end: f64,
    pub output_interval: Option<f64>,
    pub output_times: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub netlist: Option<PathBuf>,
    pub series: Option<SeriesSpec>,
    #[serde(default)]
    pub pde: PdeSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub analytic: AnalyticSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v; n],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceSpec {
    Dc {
        value: f64,
    },
    Step {
        initial: f64,
        final_value: f64,
        at: f64,
    },
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
    Pwl {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub capacitance: f64,
    pub resistances: Vec<f64>,
    pub tau_up: OneOrMany,
    pub v_up: OneOrMany,
    pub tau_down: OneOrMany,
    pub v_down: OneOrMany,
    pub voltage: Option<f64>,
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub initial_charge: f64,
    #[serde(default)]
    pub initial_state: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    #[serde(default = "default_cells")]
    pub cells: usize,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub max_dt: Option<f64>,
}

fn default_cells() -> usize {
    2000
}

impl Default for PdeSpec {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            q_min: None,
            q_max: None,
            max_dt: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
}

fn default_trajectories() -> usize {
    10_000
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            trajectories: default_trajectories(),
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSpec {
    /// Saturation time for the mean switching time summary, seconds.
    pub saturation_time: Option<f64>,
}

/// Command-line values that replace configured ones.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
}

/// A validated configuration with the circuit resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub netlist: Netlist,
    pub initial: CircuitState,
    /// Present when the circuit is a single source-memristor-capacitor loop.
    pub series: Option<SeriesCircuit>,
    pub times: Vec<f64>,
    /// Hex SHA-256 of the configuration file bytes.
    pub config_hash: String,
}

pub fn load(path: &Path, overrides: Overrides) -> Result<Prepared, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: format!("cannot read config: {e}"),
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config {
        path: path.to_path_buf(),
        message: "config is not valid UTF-8".into(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut prepared = prepare(&text, base, overrides).map_err(|e| match e {
        PrepareError::Config(message) => CliError::Config {
            path: path.to_path_buf(),
            message,
        },
        PrepareError::Netlist(file, message) => CliError::Netlist {
            path: file,
            message,
        },
    })?;
    prepared.config_hash = crate::table::sha256_hex(&bytes);
    Ok(prepared)
}

#[derive(Debug)]
pub enum PrepareError {
    Config(String),
    Netlist(PathBuf, String),
}

fn bad(message: impl Into<String>) -> PrepareError {
    PrepareError::Config(message.into())
}

fn positive(field: &str, v: f64) -> Result<(), PrepareError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!(
            "field `{field}` must be positive and finite, got {v}"
        )))
    }
}

/// Parses and validates configuration text; relative netlist paths resolve
/// against `base`.
pub fn prepare(text: &str, base: &Path, overrides: Overrides) -> Result<Prepared, PrepareError> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string().trim_end()))?;
    if let Some(seed) = overrides.seed {
        config.mc.seed = seed;
    }
    if let Some(n) = overrides.trajectories {
        config.mc.trajectories = n;
    }

    positive("t_end", config.t_end)?;
    let times = output_times(&config)?;
    if config.pde.cells < 8 {
        return Err(bad(format!(
            "field `pde.cells` must be at least 8, got {}",
            config.pde.cells
        )));
    }
    if let Some(dt) = config.pde.max_dt {
        positive("pde.max_dt", dt)?;
    }
    match (config.pde.q_min, config.pde.q_max) {
        (None, None) => {}
        (Some(lo), Some(hi)) if lo < hi && lo.is_finite() && hi.is_finite() => {}
        (Some(_), Some(_)) => return Err(bad("fields `pde.q_min` < `pde.q_max` required")),
        _ => {
            return Err(bad(
                "fields `pde.q_min` and `pde.q_max` must be given together",
            ))
        }
    }
    if config.mc.trajectories == 0 {
        return Err(bad("field `mc.trajectories` must be positive"));
    }
    if config.mc.threads == Some(0) {
        return Err(bad("field `mc.threads` must be positive"));
    }
    if let Some(t) = config.analytic.saturation_time {
        positive("analytic.saturation_time", t)?;
    }

    let (netlist, initial) = match (&config.netlist, &config.series) {
        (Some(_), Some(_)) => return Err(bad("give either `netlist` or `[series]`, not both")),
        (None, None) => return Err(bad("missing circuit: give `netlist` or `[series]`")),
        (Some(file), None) => {
            let file = base.join(file);
            let text = std::fs::read_to_string(&file).map_err(|e| {
                bad(format!(
                    "field `netlist`: cannot read {}: {e}",
                    file.display()
                ))
            })?;
            let netlist = parse_netlist(&text)
                .map_err(|e| PrepareError::Netlist(file.clone(), e.to_string()))?;
            let initial = netlist.initial_state();
            (netlist, initial)
        }
        (None, Some(spec)) => series_netlist(spec)?,
    };
    let series = SeriesCircuit::from_netlist(&netlist);
    if config.engine != Engine::Mc && series.is_none() {
        return Err(bad(format!(
            "engine `{}` needs a circuit that is one source, one memristor and one capacitor in a loop",
            config.engine.name()
        )));
    }
    if config.engine != Engine::Mc && initial.capacitor_charges.len() != 1 {
        return Err(bad("series circuit must have exactly one capacitor"));
    }
    let binary = series.as_ref().is_some_and(|s| s.model.num_states() == 2);
    if matches!(config.engine, Engine::Analytic | Engine::Compare) && !binary {
        return Err(bad(format!(
            "engine `{}` needs a two-state memristor",
            config.engine.name()
        )));
    }

    Ok(Prepared {
        config,
        netlist,
        initial,
        series,
        times,
        config_hash: String::new(),
    })
}

fn output_times(config: &RunConfig) -> Result<Vec<f64>, PrepareError> {
    let t_end = config.t_end;
    match (config.output_interval, &config.output_times) {
        (Some(_), Some(_)) => Err(bad(
            "give either `output_interval` or `output_times`, not both",
        )),
        (None, None) => Err(bad("missing field `output_interval` (or `output_times`)")),
        (Some(dt), None) => {
            positive("output_interval", dt)?;
            let n = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
            if n > 10_000_000 {
                return Err(bad("field `output_interval` yields more than 1e7 rows"));
            }
            let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
            let last = times.last_mut().expect("at least t = 0");
            if (t_end - *last).abs() <= 1e-9 * dt {
                *last = t_end;
            } else {
                times.push(t_end);
            }
            Ok(times)
        }
        (None, Some(times)) => {
            if times.is_empty() {
                return Err(bad("field `output_times` is empty"));
            }
            let sorted = times.windows(2).all(|w| w[0] < w[1]);
            let in_range = times.iter().all(|&t| (0.0..=t_end).contains(&t));
            if !(sorted && in_range) {
                return Err(bad(
                    "field `output_times` must be strictly increasing within [0, t_end]",
                ));
            }
            Ok(times.clone())
        }
    }
}

fn series_netlist(spec: &SeriesSpec) -> Result<(Netlist, CircuitState), PrepareError> {
    positive("series.capacitance", spec.capacitance)?;
    let g = spec.resistances.len();
    let model = MemristorModel::new(
        spec.resistances.clone(),
        spec.tau_up.expand(g.saturating_sub(1)),
        spec.v_up.expand(g.saturating_sub(1)),
        spec.tau_down.expand(g.saturating_sub(1)),
        spec.v_down.expand(g.saturating_sub(1)),
    )
    .map_err(|e| bad(format!("section `series`: {e}")))?;
    let waveform = match (spec.voltage, &spec.source) {
        (Some(_), Some(_)) => return Err(bad("give either `series.voltage` or `series.source`")),
        (None, None) => return Err(bad("missing field `series.voltage` (or `series.source`)")),
        (Some(v), None) => {
            if !v.is_finite() {
                return Err(bad("field `series.voltage` must be finite"));
            }
            Waveform::constant(v)
        }
        (None, Some(source)) => {
            source_waveform(source).map_err(|e| bad(format!("field `series.source`: {e}")))?
        }
    };
    if spec.initial_state >= g {
        return Err(bad(format!(
            "field `series.initial_state` must be below {g}, got {}",
            spec.initial_state
        )));
    }
    if !spec.initial_charge.is_finite() {
        return Err(bad("field `series.initial_charge` must be finite"));
    }
    let netlist = Netlist::series_mc(model, spec.capacitance, waveform)
        .map_err(|e| bad(format!("section `series`: {e}")))?;
    let mut initial = netlist.initial_state();
    initial.memristor_states[0] = spec.initial_state;
    initial.capacitor_charges[0] = spec.initial_charge;
    Ok((netlist, initial))
}

fn source_waveform(source: &SourceSpec) -> Result<Waveform, memsim::circuit::WaveformError> {
    match source {
        SourceSpec::Dc { value } => Ok(Waveform::constant(*value)),
        SourceSpec::Step {
            initial,
            final_value,
            at,
        } => Waveform::step(*initial, *final_value, *at),
        SourceSpec::Sine {
            offset,
            amplitude,
            frequency,
        } => Waveform::sine(*offset, *amplitude, *frequency),
        SourceSpec::Pwl { points } => Waveform::pwl(points.iter().map(|p| (p[0], p[1])).collect()),
    }
}
