//! Circuit description: waveforms, netlists and the instantaneous nodal solve.

pub(crate) mod mna;
mod netlist;
mod waveform;

pub(crate) use mna::LinearResponse;
pub use mna::{solve_operating_point, CircuitError, OperatingPoint};
pub use netlist::{
    parse_netlist, parse_value, CircuitState, Component, Element, Netlist, NetlistBuilder,
    NetlistError, GROUND,
};
pub use waveform::{Waveform, WaveformError};

use crate::device::MemristorModel;

/// Source, one memristor and one capacitor in a single loop. The memristor
/// sees `V(t) - q/C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCircuit {
    pub model: MemristorModel,
    pub capacitance: f64,
    pub waveform: Waveform,
}

impl SeriesCircuit {
    pub fn new(model: MemristorModel, capacitance: f64, waveform: Waveform) -> Self {
        Self {
            model,
            capacitance,
            waveform,
        }
    }

    pub fn memristor_voltage(&self, q: f64, t: f64) -> f64 {
        self.waveform.value(t) - q / self.capacitance
    }

    /// Charge velocity `dq/dt` in state `i`.
    pub fn drift(&self, i: usize, q: f64, t: f64) -> f64 {
        self.memristor_voltage(q, t) / self.model.resistance(i)
    }

    pub fn to_netlist(&self) -> Result<Netlist, NetlistError> {
        Netlist::series_mc(self.model.clone(), self.capacitance, self.waveform.clone())
    }

    /// Recognizes a netlist that is exactly one source, one memristor and one
    /// capacitor in a loop with matching orientation: the memristor's
    /// voltage equals `V(t) - q/C`.
    pub fn from_netlist(netlist: &Netlist) -> Option<Self> {
        if netlist.components().len() != 3
            || netlist.source_indices().len() != 1
            || netlist.memristor_indices().len() != 1
            || netlist.capacitor_indices().len() != 1
        {
            return None;
        }
        let model = netlist.memristor_model(0).clone();
        let capacitance = netlist.capacitance(0);
        let waveform = netlist.source_waveform(0).clone();
        let candidate = Self::new(model, capacitance, waveform);
        // probe the orientation with two independent operating points
        let lr = LinearResponse::new(netlist, &[0]).ok()?;
        let (mut i, mut v) = ([0.0], [0.0]);
        lr.eval(&[1.0, 0.0], &mut i, &mut v);
        let src_ok = (v[0] - 1.0).abs() < 1e-12;
        lr.eval(&[0.0, 1.0], &mut i, &mut v);
        let cap_ok = (v[0] + 1.0).abs() < 1e-12;
        let cur_ok = (i[0] + 1.0 / candidate.model.resistance(0)).abs()
            < 1e-12 / candidate.model.resistance(0);
        (src_ok && cap_ok && cur_ok).then_some(candidate)
    }
}
