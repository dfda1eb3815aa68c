//! Dispatch from a prepared configuration to the engines.

use memsim::analytic::{
    mean_switching_time, p0_asymptotic, p0_constant_voltage, unidirectional_densities,
    ConstantDriveParams, Density1D,
};
use memsim::circuit::{SeriesCircuit, Waveform};
use memsim::mc::{run_ensemble, EnsembleConfig, EnsembleStats};
use memsim::pde::{run, ChargeGrid, DistributionField, PdeRun, RunOptions};

use crate::config::{Engine, Prepared};
use crate::error::CliError;
use crate::table::ResultTable;

/// `|sum - 1|` allowed per row, by engine.
pub const ANALYTIC_TOL: f64 = 1e-12;
pub const MC_TOL: f64 = 1e-12;
pub const PDE_TOL: f64 = 1e-6;

/// Machine-readable result of the `compare` engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSummary {
    pub max_abs_dev_pde: f64,
    pub max_z_mc: f64,
}

pub struct Outcome {
    pub table: ResultTable,
    pub summary: Option<CompareSummary>,
}

pub fn simulate(p: &Prepared) -> Result<Outcome, CliError> {
    let mut table = match p.config.engine {
        Engine::Analytic => analytic_table(p)?,
        Engine::Pde => pde_table(p)?,
        Engine::Mc => mc_table(p)?,
        Engine::Compare => return compare(p),
    };
    finish(&mut table)?;
    Ok(Outcome {
        table,
        summary: None,
    })
}

fn header(p: &Prepared, tol: f64, columns: Vec<String>) -> ResultTable {
    let mut t = ResultTable::new(columns, tol);
    t.push_meta("engine", p.config.engine.name());
    t.push_meta("config_sha256", &p.config_hash);
    t.push_meta("version", env!("CARGO_PKG_VERSION"));
    t
}

fn finish(table: &mut ResultTable) -> Result<(), CliError> {
    match table.check_probabilities() {
        None => Ok(()),
        Some((row, group, sum)) => Err(CliError::Engine(format!(
            "row {row}: probability group {group} sums to {sum:.17e}, outside the tolerance {:e}",
            table.prob_tolerance
        ))),
    }
}

fn series(p: &Prepared) -> &SeriesCircuit {
    p.series.as_ref().expect("validated: series circuit")
}

fn initial_q(p: &Prepared) -> f64 {
    p.initial.capacitor_charges[0]
}

fn initial_i(p: &Prepared) -> usize {
    p.initial.memristor_states[0]
}

fn constant_params(p: &Prepared) -> Option<ConstantDriveParams> {
    let s = series(p);
    match s.waveform {
        Waveform::Constant(va) if initial_i(p) == 0 && s.model.num_states() == 2 => {
            Some(ConstantDriveParams {
                capacitance: s.capacitance,
                r0: s.model.resistance(0),
                r1: s.model.resistance(1),
                tau0: s.model.tau_up()[0],
                v0: s.model.v_up()[0],
                va,
                q0: initial_q(p),
            })
        }
        _ => None,
    }
}

/// No-switch probability of the binary series circuit at each output time.
fn analytic_p0(p: &Prepared) -> Result<Vec<f64>, CliError> {
    let err = |e| CliError::engine("analytic", e);
    if let Some(params) = constant_params(p) {
        return p
            .times
            .iter()
            .map(|&t| p0_constant_voltage(&params, t).map_err(err))
            .collect();
    }
    let s = series(p);
    let q0 = initial_q(p);
    let (f, g) = if initial_i(p) == 0 {
        (Density1D::delta(q0, 1.0), Density1D::zero())
    } else {
        (Density1D::zero(), Density1D::delta(q0, 1.0))
    };
    p.times
        .iter()
        .map(|&t| {
            unidirectional_densities(&f, &g, &s.model, s.capacitance, &s.waveform, t)
                .map(|sol| sol.p0.mass())
                .map_err(err)
        })
        .collect()
}

fn analytic_table(p: &Prepared) -> Result<ResultTable, CliError> {
    let p0 = analytic_p0(p)?;
    let mut t = header(
        p,
        ANALYTIC_TOL,
        vec!["time".into(), "p0".into(), "p1".into()],
    );
    t.prob_groups.push(vec![1, 2]);
    if let Some(params) = constant_params(p) {
        if let Ok(a) = p0_asymptotic(&params) {
            t.push_meta("p0_plateau_asymptotic", a.value);
        }
        if let Some(t_star) = p.config.analytic.saturation_time {
            let mean = mean_switching_time(&params, t_star)
                .map_err(|e| CliError::engine("analytic", e))?;
            t.push_meta("saturation_time", t_star);
            t.push_meta("mean_switching_time", mean);
        }
    }
    for (&time, &p0) in p.times.iter().zip(&p0) {
        t.push_row(vec![time, p0, 1.0 - p0]);
    }
    Ok(t)
}

fn pde_run(p: &Prepared) -> Result<PdeRun, CliError> {
    let err = |e| CliError::engine("pde", e);
    let s = series(p);
    let spec = &p.config.pde;
    let q0 = initial_q(p);
    let grid = match (spec.q_min, spec.q_max) {
        (Some(lo), Some(hi)) => ChargeGrid::new(lo, hi, spec.cells),
        _ => ChargeGrid::for_circuit(s, (q0, q0), p.config.t_end, spec.cells),
    }
    .map_err(err)?;
    let field = DistributionField::point_mass(grid, s.model.num_states(), initial_i(p), q0, 0.0)
        .map_err(err)?;
    let options = RunOptions {
        max_dt: spec.max_dt.unwrap_or(f64::INFINITY),
        keep_snapshots: false,
    };
    run(field, &p.times, s, options).map_err(err)
}

fn pde_table(p: &Prepared) -> Result<ResultTable, CliError> {
    let out = pde_run(p)?;
    let g = series(p).model.num_states();
    let mut columns = vec!["time".to_string()];
    columns.extend((0..g).map(|i| format!("p{i}")));
    columns.extend((0..g).map(|i| format!("mean_q{i}")));
    columns.extend((0..g).map(|i| format!("var_q{i}")));
    columns.push("mass".into());
    let mut t = header(p, PDE_TOL, columns);
    t.prob_groups.push((1..=g).collect());
    let grid = out.final_field.grid();
    t.push_meta("cells", grid.n_cells());
    t.push_meta("q_min", grid.q_min());
    t.push_meta("q_max", grid.q_max());
    t.push_meta("steps", out.steps);
    t.push_meta("max_mass_error", out.max_mass_error);
    t.push_meta("boundary_loss", out.final_field.boundary_loss());
    for s in &out.samples {
        let mut row = vec![s.time];
        row.extend(&s.marginals);
        row.extend(&s.means);
        row.extend(&s.variances);
        row.push(s.mass);
        t.push_row(row);
    }
    Ok(t)
}

fn mc_stats(p: &Prepared) -> Result<EnsembleStats, CliError> {
    let mc = &p.config.mc;
    let config = EnsembleConfig {
        t_end: p.config.t_end,
        output_times: p.times.clone(),
        trajectories: mc.trajectories,
        master_seed: mc.seed,
        histogram: None,
        threads: mc.threads,
    };
    let stats =
        run_ensemble(&p.netlist, &p.initial, &config).map_err(|e| CliError::engine("mc", e))?;
    if stats.n == 0 {
        let first = stats
            .failures
            .first()
            .map(|(i, e)| format!("trajectory {i}: {e}"));
        return Err(CliError::Engine(format!(
            "mc: every trajectory failed ({})",
            first.unwrap_or_default()
        )));
    }
    Ok(stats)
}

fn push_mc_meta(t: &mut ResultTable, p: &Prepared, stats: &EnsembleStats) {
    t.push_meta("seed", p.config.mc.seed);
    t.push_meta("trajectories", stats.requested);
    t.push_meta("completed", stats.n);
    t.push_meta("failures", stats.failures.len());
    t.push_meta("up_events", stats.up_events);
    t.push_meta("down_events", stats.down_events);
    if let Some((mean, se)) = stats.mean_first_switch_time() {
        t.push_meta("mean_first_switch_time", mean);
        t.push_meta("mean_first_switch_time_stderr", se);
    }
}

fn mc_table(p: &Prepared) -> Result<ResultTable, CliError> {
    let stats = mc_stats(p)?;
    let net = &p.netlist;
    let memristors = net.memristor_indices().len();
    let label = |m: usize, what: String| {
        if memristors == 1 {
            what
        } else {
            format!(
                "{}_{what}",
                net.components()[net.memristor_indices()[m]].name
            )
        }
    };
    let mut columns = vec!["time".to_string()];
    let mut stderr_columns = Vec::new();
    let mut layout = Vec::new();
    let mut groups = Vec::new();
    for m in 0..memristors {
        let start = columns.len();
        for i in 0..net.memristor_model(m).num_states() {
            columns.push(label(m, format!("p{i}")));
            stderr_columns.push(label(m, format!("stderr_p{i}")));
            layout.push((m, i));
        }
        groups.push((start..columns.len()).collect());
    }
    columns.extend(stderr_columns);
    let mut t = header(p, MC_TOL, columns);
    t.prob_groups = groups;
    push_mc_meta(&mut t, p, &stats);
    for (k, &time) in stats.times.iter().enumerate() {
        let mut row = vec![time];
        row.extend(layout.iter().map(|&(m, i)| stats.occupation[m][i][k]));
        row.extend(layout.iter().map(|&(m, i)| stats.stderr[m][i][k]));
        t.push_row(row);
    }
    Ok(t)
}

fn compare(p: &Prepared) -> Result<Outcome, CliError> {
    let analytic = analytic_p0(p)?;
    let pde = pde_run(p)?;
    let stats = mc_stats(p)?;
    let columns = [
        "time",
        "p0_analytic",
        "p1_analytic",
        "p0_pde",
        "p1_pde",
        "p0_mc",
        "p1_mc",
        "stderr_mc",
    ];
    let mut t = header(p, PDE_TOL, columns.iter().map(|c| c.to_string()).collect());
    t.prob_groups = vec![vec![1, 2], vec![3, 4], vec![5, 6]];
    let mut summary = CompareSummary {
        max_abs_dev_pde: 0.0,
        max_z_mc: 0.0,
    };
    for (k, &time) in p.times.iter().enumerate() {
        let a = analytic[k];
        let s = &pde.samples[k];
        let (m0, m1, se) = (
            stats.occupation[0][0][k],
            stats.occupation[0][1][k],
            stats.stderr[0][0][k],
        );
        summary.max_abs_dev_pde = summary.max_abs_dev_pde.max((a - s.marginals[0]).abs());
        let z = if se > 0.0 {
            (a - m0).abs() / se
        } else if (a - m0).abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        summary.max_z_mc = summary.max_z_mc.max(z);
        t.push_row(vec![
            time,
            a,
            1.0 - a,
            s.marginals[0],
            s.marginals[1],
            m0,
            m1,
            se,
        ]);
    }
    t.push_meta("cells", pde.final_field.grid().n_cells());
    push_mc_meta(&mut t, p, &stats);
    t.push_meta("max_abs_dev_pde", summary.max_abs_dev_pde);
    t.push_meta("max_z_mc", summary.max_z_mc);
    finish(&mut t)?;
    Ok(Outcome {
        table: t,
        summary: Some(summary),
    })
}
