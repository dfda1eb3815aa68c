//! Modified nodal analysis of the instantaneous resistive network.
//!
//! Capacitors enter as ideal voltage sources of value `q/C` and memristors
//! as resistors of their current state, so at every instant the circuit is
//! a linear resistive network. Unknowns are the non-ground node voltages
//! followed by one branch current per voltage source and per capacitor.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::netlist::{CircuitState, Element, Netlist};

/// Pivot ratio below which the nodal matrix is declared singular.
const SINGULAR_RATIO: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("singular network matrix ({reason}); offending nodes: {}", .nodes.join(", "))]
    Singular { reason: String, nodes: Vec<String> },
    #[error("state does not match netlist: {0}")]
    State(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// Indexed like [`Netlist::nodes`]; entry 0 is ground.
    pub node_voltages: Vec<f64>,
    /// `V(n+) - V(n-)` per memristor.
    pub memristor_voltages: Vec<f64>,
    /// `dq/dt` per capacitor: current entering its first terminal.
    pub capacitor_currents: Vec<f64>,
    /// Current leaving each source's positive terminal into the source.
    pub source_currents: Vec<f64>,
}

/// LU-factored nodal matrix for one memristor configuration.
pub(crate) struct Factored {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    node_unknowns: usize,
    n_src: usize,
    n_cap: usize,
}

impl Factored {
    pub(crate) fn new(netlist: &Netlist, states: &[usize]) -> Result<Self, CircuitError> {
        let node_unknowns = netlist.node_count();
        let n_src = netlist.source_indices().len();
        let n_cap = netlist.capacitor_indices().len();
        let size = node_unknowns + n_src + n_cap;
        let mut a = DMatrix::<f64>::zeros(size, size);

        let row = |node: usize| node.checked_sub(1);
        let mut branch = node_unknowns;
        let mut mem = 0;
        let mut branch_of = vec![usize::MAX; netlist.components().len()];
        // sources first, then capacitors, matching the RHS layout
        for &ci in netlist
            .source_indices()
            .iter()
            .chain(netlist.capacitor_indices())
        {
            branch_of[ci] = branch;
            branch += 1;
        }
        for (ci, c) in netlist.components().iter().enumerate() {
            let conductance = match &c.element {
                Element::Resistor(r) => Some(1.0 / r),
                Element::Memristor { model, .. } => {
                    let g = 1.0 / model.resistance(states[mem]);
                    mem += 1;
                    Some(g)
                }
                _ => None,
            };
            match conductance {
                Some(g) => {
                    if let Some(p) = row(c.pos) {
                        a[(p, p)] += g;
                    }
                    if let Some(n) = row(c.neg) {
                        a[(n, n)] += g;
                    }
                    if let (Some(p), Some(n)) = (row(c.pos), row(c.neg)) {
                        a[(p, n)] -= g;
                        a[(n, p)] -= g;
                    }
                }
                None => {
                    let j = branch_of[ci];
                    if let Some(p) = row(c.pos) {
                        a[(p, j)] += 1.0;
                        a[(j, p)] += 1.0;
                    }
                    if let Some(n) = row(c.neg) {
                        a[(n, j)] -= 1.0;
                        a[(j, n)] -= 1.0;
                    }
                }
            }
        }

        let lu = a.lu();
        let diag = lu.u().diagonal();
        let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let min = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
        if size > 0 && (max == 0.0 || min / max < SINGULAR_RATIO) {
            return Err(singular_diagnostic(netlist));
        }
        Ok(Self {
            lu,
            node_unknowns,
            n_src,
            n_cap,
        })
    }

    pub(crate) fn input_len(&self) -> usize {
        self.n_src + self.n_cap
    }

    /// Solves for the given source voltages and capacitor voltages `q/C`.
    /// Returns node voltages (without ground) followed by branch currents.
    pub(crate) fn solve(&self, source_volts: &[f64], cap_volts: &[f64]) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.node_unknowns + self.n_src + self.n_cap);
        for (k, v) in source_volts.iter().chain(cap_volts).enumerate() {
            rhs[self.node_unknowns + k] = *v;
        }
        self.lu
            .solve(&rhs)
            .expect("factorization checked non-singular")
    }

    pub(crate) fn node_unknowns(&self) -> usize {
        self.node_unknowns
    }
}

fn singular_diagnostic(netlist: &Netlist) -> CircuitError {
    // A loop made only of sources and capacitors over-determines voltages.
    let n = netlist.nodes().len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for c in netlist.components() {
        if matches!(
            c.element,
            Element::VoltageSource(_) | Element::Capacitor { .. }
        ) {
            let (a, b) = (find(&mut parent, c.pos), find(&mut parent, c.neg));
            if a == b {
                let mut nodes: Vec<String> = (0..n)
                    .filter(|&i| find(&mut parent, i) == a)
                    .map(|i| netlist.nodes()[i].clone())
                    .collect();
                nodes.sort();
                return CircuitError::Singular {
                    reason: format!(
                        "loop of voltage sources and capacitors closed by {}",
                        c.name
                    ),
                    nodes,
                };
            }
            parent[b] = a;
        }
    }
    CircuitError::Singular {
        reason: "no unique solution".into(),
        nodes: netlist.nodes()[1..].to_vec(),
    }
}

/// Solves the resistive network at `state` and reports node voltages,
/// memristor voltage drops and capacitor charge derivatives.
pub fn solve_operating_point(
    netlist: &Netlist,
    state: &CircuitState,
) -> Result<OperatingPoint, CircuitError> {
    netlist.check_state(state).map_err(CircuitError::State)?;
    let factored = Factored::new(netlist, &state.memristor_states)?;
    let source_volts: Vec<f64> = (0..netlist.source_indices().len())
        .map(|s| netlist.source_waveform(s).value(state.time))
        .collect();
    let cap_volts: Vec<f64> = state
        .capacitor_charges
        .iter()
        .enumerate()
        .map(|(k, q)| q / netlist.capacitance(k))
        .collect();
    let x = factored.solve(&source_volts, &cap_volts);
    Ok(unpack(netlist, &factored, &x))
}

fn unpack(netlist: &Netlist, f: &Factored, x: &DVector<f64>) -> OperatingPoint {
    let nu = f.node_unknowns();
    let mut node_voltages = vec![0.0; nu + 1];
    node_voltages[1..].copy_from_slice(&x.as_slice()[..nu]);
    let memristor_voltages = netlist
        .memristor_indices()
        .iter()
        .map(|&ci| {
            let c = &netlist.components()[ci];
            node_voltages[c.pos] - node_voltages[c.neg]
        })
        .collect();
    let n_src = netlist.source_indices().len();
    let source_currents = x.as_slice()[nu..nu + n_src].to_vec();
    let capacitor_currents = x.as_slice()[nu + n_src..].to_vec();
    OperatingPoint {
        node_voltages,
        memristor_voltages,
        capacitor_currents,
        source_currents,
    }
}

/// Linear map from `[source volts; capacitor volts]` to capacitor currents
/// and memristor voltages for a fixed memristor configuration.
#[derive(Debug, Clone)]
pub(crate) struct LinearResponse {
    n_in: usize,
    /// Row-major, `n_cap x n_in`.
    cap_gain: Vec<f64>,
    /// Row-major, `n_mem x n_in`.
    mem_gain: Vec<f64>,
    n_cap: usize,
    n_mem: usize,
}

impl LinearResponse {
    pub(crate) fn new(netlist: &Netlist, states: &[usize]) -> Result<Self, CircuitError> {
        let f = Factored::new(netlist, states)?;
        let n_in = f.input_len();
        let n_src = netlist.source_indices().len();
        let n_cap = netlist.capacitor_indices().len();
        let n_mem = netlist.memristor_indices().len();
        let mut cap_gain = vec![0.0; n_cap * n_in];
        let mut mem_gain = vec![0.0; n_mem * n_in];
        let mut unit = vec![0.0; n_in];
        for col in 0..n_in {
            unit.iter_mut().for_each(|u| *u = 0.0);
            unit[col] = 1.0;
            let x = f.solve(&unit[..n_src], &unit[n_src..]);
            let op = unpack(netlist, &f, &x);
            for (k, i) in op.capacitor_currents.iter().enumerate() {
                cap_gain[k * n_in + col] = *i;
            }
            for (m, v) in op.memristor_voltages.iter().enumerate() {
                mem_gain[m * n_in + col] = *v;
            }
        }
        Ok(Self {
            n_in,
            cap_gain,
            mem_gain,
            n_cap,
            n_mem,
        })
    }

    /// `inputs` is `[source volts..., capacitor volts...]`.
    pub(crate) fn eval(&self, inputs: &[f64], cap_currents: &mut [f64], mem_volts: &mut [f64]) {
        for k in 0..self.n_cap {
            let row = &self.cap_gain[k * self.n_in..(k + 1) * self.n_in];
            cap_currents[k] = row.iter().zip(inputs).map(|(g, x)| g * x).sum();
        }
        for m in 0..self.n_mem {
            let row = &self.mem_gain[m * self.n_in..(m + 1) * self.n_in];
            mem_volts[m] = row.iter().zip(inputs).map(|(g, x)| g * x).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::netlist::{parse_netlist, NetlistBuilder, GROUND};
    use crate::circuit::Waveform;
    use crate::device::MemristorModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn binary() -> MemristorModel {
        MemristorModel::binary(1e5, 1e4, 3e5, 0.02, 3e5, 0.02).unwrap()
    }

    fn state(mem: Vec<usize>, caps: Vec<f64>) -> CircuitState {
        CircuitState {
            memristor_states: mem,
            capacitor_charges: caps,
            time: 0.0,
        }
    }

    #[test]
    fn series_circuit_follows_kirchhoff() {
        let n = Netlist::series_mc(binary(), 1e-6, Waveform::Constant(0.35)).unwrap();
        let q = 1.2e-7;
        let op = solve_operating_point(&n, &state(vec![0], vec![q])).unwrap();
        let vm = 0.35 - q / 1e-6;
        assert_relative_eq!(op.memristor_voltages[0], vm, max_relative = 1e-13);
        assert_relative_eq!(op.capacitor_currents[0], vm / 1e5, max_relative = 1e-13);

        let op = solve_operating_point(&n, &state(vec![1], vec![q])).unwrap();
        assert_relative_eq!(op.capacitor_currents[0], vm / 1e4, max_relative = 1e-13);
    }

    #[test]
    fn equilibrium_charge_gives_zero_current() {
        let n = Netlist::series_mc(binary(), 1e-6, Waveform::Constant(0.35)).unwrap();
        let op = solve_operating_point(&n, &state(vec![0], vec![0.35e-6])).unwrap();
        assert!(op.capacitor_currents[0].abs() < 1e-18);
        assert!(op.memristor_voltages[0].abs() < 1e-15);
    }

    #[test]
    fn parallel_memristors_halve_resistance() {
        let mut b = NetlistBuilder::new();
        b.voltage_source("V1", "a", GROUND, Waveform::Constant(0.35))
            .memristor("M1", "a", "b", binary(), None)
            .memristor("M2", "a", "b", binary(), None)
            .capacitor("C1", "b", GROUND, 1e-6, None);
        let n = b.build().unwrap();
        let q = 5e-8;
        let op = solve_operating_point(&n, &state(vec![0, 0], vec![q])).unwrap();
        let expected = (0.35 - q / 1e-6) / (1e5 / 2.0);
        assert_relative_eq!(op.capacitor_currents[0], expected, max_relative = 1e-13);
    }

    #[test]
    fn capacitor_across_source_is_singular() {
        let n = parse_netlist("V1 a 0 DC 1\nC1 a 0 1u\nR1 a 0 1k").unwrap();
        let err = solve_operating_point(&n, &n.initial_state()).unwrap_err();
        match err {
            CircuitError::Singular { nodes, reason } => {
                assert_eq!(nodes, vec!["0".to_string(), "a".to_string()]);
                assert!(reason.contains("C1"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let n = Netlist::series_mc(binary(), 1e-6, Waveform::Constant(0.35)).unwrap();
        assert!(matches!(
            solve_operating_point(&n, &state(vec![2], vec![0.0])),
            Err(CircuitError::State(_))
        ));
        assert!(matches!(
            solve_operating_point(&n, &state(vec![0], vec![])),
            Err(CircuitError::State(_))
        ));
    }

    #[test]
    fn linear_response_matches_direct_solve() {
        let n = parse_netlist(
            "V1 a 0 SIN 0.1 0.3 50\nR1 a b 2k\nM1 b c STATES=2 R=100k,10k TAUUP=1 VUP=1 TAUDOWN=1 VDOWN=1\n\
             C1 c 0 1u IC=10n\nM2 b d STATES=2 R=50k,5k TAUUP=1 VUP=1 TAUDOWN=1 VDOWN=1\nC2 d 0 2u",
        )
        .unwrap();
        let st = CircuitState {
            memristor_states: vec![1, 0],
            capacitor_charges: vec![1e-8, -3e-8],
            time: 0.003,
        };
        let op = solve_operating_point(&n, &st).unwrap();
        let lr = LinearResponse::new(&n, &st.memristor_states).unwrap();
        let inputs = [
            n.source_waveform(0).value(st.time),
            1e-8 / 1e-6,
            -3e-8 / 2e-6,
        ];
        let (mut i, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        lr.eval(&inputs, &mut i, &mut v);
        for k in 0..2 {
            assert_relative_eq!(i[k], op.capacitor_currents[k], max_relative = 1e-12);
            assert_relative_eq!(v[k], op.memristor_voltages[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn scaling_resistances_scales_current() {
        let scale = 7.5;
        let a = MemristorModel::binary(1e5, 1e4, 3e5, 0.02, 3e5, 0.02).unwrap();
        let b = MemristorModel::binary(
            1e5 * scale,
            1e4 * scale,
            3e5 * scale,
            0.02,
            3e5 * scale,
            0.02,
        )
        .unwrap();
        let na = Netlist::series_mc(a, 1e-6, Waveform::Constant(0.35)).unwrap();
        let nb = Netlist::series_mc(b, 1e-6, Waveform::Constant(0.35)).unwrap();
        let st = state(vec![0], vec![1e-7]);
        let ia = solve_operating_point(&na, &st).unwrap().capacitor_currents[0];
        let ib = solve_operating_point(&nb, &st).unwrap().capacitor_currents[0];
        assert_relative_eq!(ia * 1e5, ib * 1e5 * scale, max_relative = 1e-13);
    }

    // Random ladder: KCL must hold at every non-ground node.
    proptest! {
        #[test]
        fn kcl_holds_on_random_networks(
            rs in proptest::collection::vec(10.0f64..1e6, 6),
            states in proptest::collection::vec(0usize..2, 2),
            qs in proptest::collection::vec(-1e-6f64..1e-6, 2),
            v in -2.0f64..2.0,
        ) {
            let model = |r0: f64, r1: f64| MemristorModel::binary(r0, r1, 1.0, 1.0, 1.0, 1.0).unwrap();
            let mut b = NetlistBuilder::new();
            b.voltage_source("V1", "a", GROUND, Waveform::Constant(v))
                .resistor("R1", "a", "b", rs[0])
                .memristor("M1", "b", "c", model(rs[1], rs[2]), None)
                .resistor("R2", "b", GROUND, rs[3])
                .capacitor("C1", "c", GROUND, 1e-6, None)
                .memristor("M2", "c", "d", model(rs[4], rs[5]), None)
                .capacitor("C2", "d", "b", 3e-6, None);
            let n = b.build().unwrap();
            let st = CircuitState { memristor_states: states, capacitor_charges: qs, time: 0.0 };
            let op = solve_operating_point(&n, &st).unwrap();
            let vn = &op.node_voltages;
            let mut net = vec![0.0f64; n.nodes().len()];
            let mut scale = vec![0.0f64; n.nodes().len()];
            let (mut m, mut k, mut s) = (0, 0, 0);
            for c in n.components() {
                let i = match &c.element {
                    Element::Resistor(r) => (vn[c.pos] - vn[c.neg]) / r,
                    Element::Memristor { model, .. } => {
                        let r = model.resistance(st.memristor_states[m]);
                        m += 1;
                        (vn[c.pos] - vn[c.neg]) / r
                    }
                    Element::Capacitor { .. } => { k += 1; op.capacitor_currents[k - 1] }
                    Element::VoltageSource(_) => { s += 1; op.source_currents[s - 1] }
                };
                net[c.pos] += i;
                net[c.neg] -= i;
                scale[c.pos] += i.abs();
                scale[c.neg] += i.abs();
            }
            for node in 1..net.len() {
                prop_assert!(net[node].abs() <= 1e-12 * scale[node].max(1e-300));
            }
        }
    }
}
