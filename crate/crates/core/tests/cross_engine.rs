//! Agreement between the closed forms, the PDE solver and Monte Carlo.

mod common;

use common::*;
use memsim::analytic::{
    expint_ei, mean_switching_time_routes, p0_constant_voltage, unidirectional_densities,
    ConstantDriveParams, Density1D,
};
use memsim::circuit::{Netlist, SeriesCircuit, Waveform};
use memsim::device::MemristorModel;
use memsim::mc::{run_ensemble, EnsembleConfig, HistogramSpec};
use memsim::pde::{run, ChargeGrid, DistributionField, RunOptions};

fn reference_model() -> MemristorModel {
    MemristorModel::binary(R0, R1, TAU0, V0, TAU0, V0).unwrap()
}

fn reference_netlist() -> Netlist {
    Netlist::series_mc(reference_model(), C, Waveform::Constant(VA)).unwrap()
}

fn ensemble(
    times: Vec<f64>,
    n: usize,
    seed: u64,
    histogram: Option<HistogramSpec>,
) -> EnsembleConfig {
    EnsembleConfig {
        t_end: *times.last().unwrap(),
        output_times: times,
        trajectories: n,
        master_seed: seed,
        histogram,
        threads: None,
    }
}

#[test]
fn ei_matches_reference_table_and_quadrature_oracle() {
    for (x, want) in EI_TABLE {
        let got = expint_ei(x).unwrap();
        assert!(
            ((got - want) / want).abs() < 1e-13,
            "Ei({x}) = {got}, want {want}"
        );
        let oracle = ei_oracle(x);
        assert!(
            ((got - oracle) / oracle).abs() < 1e-10,
            "Ei({x}) = {got}, oracle {oracle}"
        );
    }
}

#[test]
fn ei_large_argument_is_close_to_asymptotic_form() {
    let x: f64 = 17.5;
    let asym = x.exp() / (x - 1.0);
    let got = expint_ei(x).unwrap();
    // Ei(x) x e^{-x} = 1 + 1/x + 2/x^2 + ..., e^x/(x-1) drops 1/x^2 of it
    assert!(((got - asym) / got).abs() < 2.0 / (x * x));
}

#[test]
fn closed_form_matches_direct_hazard_quadrature() {
    let p = ConstantDriveParams::reference_case();
    for t in [1e-4, 1e-3, 5e-3, 0.02, 0.1, 1.0] {
        let got = p0_constant_voltage(&p, t).unwrap();
        let oracle = p0_oracle(t);
        assert!((got - oracle).abs() < 1e-11, "t={t}: {got} vs {oracle}");
    }
    assert!((p0_constant_voltage(&p, 0.02).unwrap() - P0_AT_20MS).abs() < 1e-13);
    assert!((p0_constant_voltage(&p, 1.0).unwrap() - P0_AT_1S).abs() < 1e-13);
}

#[test]
fn mean_switching_time_routes_agree() {
    let m = mean_switching_time_routes(&ConstantDriveParams::reference_case(), 1.0).unwrap();
    assert!(((m.moment - m.by_parts) / m.moment).abs() < 1e-6);
    assert!((m.moment - 5.3e-3).abs() < 0.1e-3);
}

#[test]
fn closed_form_at_20ms_agrees_with_monte_carlo() {
    let net = reference_netlist();
    let stats = run_ensemble(
        &net,
        &net.initial_state(),
        &ensemble(vec![0.02], 50_000, 77, None),
    )
    .unwrap();
    let exact = p0_constant_voltage(&ConstantDriveParams::reference_case(), 0.02).unwrap();
    let z = (stats.occupation[0][0][0] - exact).abs() / stats.stderr[0][0][0];
    assert!(z <= 3.0, "z = {z}");
}

#[test]
fn monte_carlo_plateau_and_mean_switching_time() {
    let net = reference_netlist();
    let stats = run_ensemble(
        &net,
        &net.initial_state(),
        &ensemble(vec![1.0], 100_000, 9, None),
    )
    .unwrap();
    let p0 = stats.occupation[0][0][0];
    let band = 3.0 * (0.446f64 * 0.554 / 1e5).sqrt();
    assert!((p0 - 0.446).abs() <= band, "p0 = {p0}");
    assert_eq!(stats.down_events, 0);
    assert!(stats.up_events <= stats.n as u64);
    let (mean, _) = stats.mean_first_switch_time().unwrap();
    assert!((mean - 5.3e-3).abs() <= 0.05 * 5.3e-3, "mean = {mean}");
}

/// Mass per histogram bin from a PDE field whose cells nest in the bins.
fn pde_bin_masses(field: &DistributionField, state: usize, cells_per_bin: usize) -> Vec<f64> {
    let dq = field.grid().dq();
    field
        .density(state)
        .chunks(cells_per_bin)
        .map(|c| c.iter().sum::<f64>() * dq)
        .collect()
}

#[test]
fn conditional_charge_histograms_agree_with_pde() {
    let model = reference_model();
    let circuit = SeriesCircuit::new(model.clone(), C, Waveform::Constant(VA));
    let times = vec![0.005, 0.02];
    let bins = 100;
    let cells = 2000;
    let grid = ChargeGrid::for_circuit(&circuit, (0.0, 0.0), 0.02, cells).unwrap();
    let opts = RunOptions {
        keep_snapshots: true,
        ..RunOptions::default()
    };
    let pde = run(
        DistributionField::point_mass(grid, 2, 0, 0.0, 0.0).unwrap(),
        &times,
        &circuit,
        opts,
    )
    .unwrap();

    let spec = HistogramSpec {
        memristor: 0,
        capacitor: 0,
        q_min: grid.q_min(),
        q_max: grid.q_max(),
        bins,
    };
    let net = circuit.to_netlist().unwrap();
    let n = 50_000;
    let stats = run_ensemble(
        &net,
        &net.initial_state(),
        &ensemble(times.clone(), n, 123, Some(spec.clone())),
    )
    .unwrap();
    let hist = stats.histograms.as_ref().unwrap();
    let width = spec.bin_width();
    for (k, &t) in times.iter().enumerate() {
        let exact = unidirectional_densities(
            &Density1D::delta(0.0, 1.0),
            &Density1D::zero(),
            &model,
            C,
            &circuit.waveform,
            t,
        )
        .unwrap();
        for (state, reference) in [(0, &exact.p0), (1, &exact.p1)] {
            let mc: Vec<f64> = hist[k][state]
                .iter()
                .map(|&c| c as f64 / n as f64)
                .collect();
            let field = pde_bin_masses(&pde.snapshots[k], state, cells / bins);
            let truth: Vec<f64> = (0..bins)
                .map(|b| {
                    let lo = spec.q_min + b as f64 * width;
                    let hi = if b + 1 == bins {
                        spec.q_max
                    } else {
                        lo + width
                    };
                    // half-open bins, matching the histogram
                    reference.mass_between(lo, hi) - reference.mass_between(hi, hi)
                })
                .collect();
            let l1: f64 = mc.iter().zip(&field).map(|(a, b)| (a - b).abs()).sum();
            let binomial: f64 = truth
                .iter()
                .map(|&p| (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / n as f64).sqrt())
                .sum();
            let discretization: f64 = field.iter().zip(&truth).map(|(a, b)| (a - b).abs()).sum();
            assert!(
                l1 <= 3.0 * (binomial + discretization),
                "t={t} state {state}: L1 {l1:.3e}, binomial {binomial:.3e}, discretization {discretization:.3e}"
            );
        }
    }
}

#[test]
fn characteristics_solution_matches_pde_densities() {
    // continuous initial mass, constant drive: the state-1 density from the
    // characteristics formula against the finite-volume field
    let model = reference_model();
    let circuit = SeriesCircuit::new(model.clone(), C, Waveform::Constant(VA));
    let f = Density1D::uniform(0.0, 1e-7);
    let t = 0.01;
    let sol =
        unidirectional_densities(&f, &Density1D::zero(), &model, C, &circuit.waveform, t).unwrap();
    let grid = ChargeGrid::for_circuit(&circuit, (0.0, 1e-7), t, 2000).unwrap();
    let field =
        DistributionField::from_densities(grid, &[f.clone(), Density1D::zero()], 0.0).unwrap();
    let out = run(field, &[t], &circuit, RunOptions::default()).unwrap();
    let p1_exact = sol.p1.mass();
    assert!((out.samples[0].marginals[1] - p1_exact).abs() < 5e-3);
    let l1 = out.final_field.l1_error(1, &sol.p1);
    assert!(l1 < 0.05 * p1_exact, "L1 = {l1}, p1 = {p1_exact}");
}

#[test]
fn three_state_ladder_pde_agrees_with_monte_carlo() {
    let model = MemristorModel::uniform(vec![1e5, 3e4, 1e4], TAU0, V0, TAU0, V0).unwrap();
    let circuit = SeriesCircuit::new(model, C, Waveform::Constant(VA));
    let times: Vec<f64> = (1..=8).map(|k| 0.005 * k as f64).collect();
    let grid = ChargeGrid::for_circuit(&circuit, (0.0, 0.0), 0.04, 1000).unwrap();
    let pde = run(
        DistributionField::point_mass(grid, 3, 0, 0.0, 0.0).unwrap(),
        &times,
        &circuit,
        RunOptions::default(),
    )
    .unwrap();
    let net = circuit.to_netlist().unwrap();
    let stats = run_ensemble(
        &net,
        &net.initial_state(),
        &ensemble(times.clone(), 20_000, 5, None),
    )
    .unwrap();
    let mut last = 0.0;
    for (k, s) in pde.samples.iter().enumerate() {
        for i in 0..3 {
            let diff = (s.marginals[i] - stats.occupation[0][i][k]).abs();
            let tol = 3.0 * stats.stderr[0][i][k] + 5e-3;
            assert!(
                diff <= tol,
                "t={} state {i}: {diff:.3e} > {tol:.3e}",
                s.time
            );
        }
        assert!(s.marginals[2] >= last);
        last = s.marginals[2];
    }
    assert_eq!(stats.down_events, 0);
}
