//! Built-in reference curves for the constant-drive series circuit.

use memsim::analytic::{mean_switching_time, p0_constant_voltage, ConstantDriveParams};

use crate::engines::ANALYTIC_TOL;
use crate::error::CliError;
use crate::table::ResultTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
        }
    }
}

const T_END: f64 = 0.03;
const ROWS: usize = 300;
/// Time by which the switched fraction has saturated, seconds.
const SATURATION_TIME: f64 = 1.0;

fn times() -> Vec<f64> {
    (0..=ROWS).map(|k| T_END * k as f64 / ROWS as f64).collect()
}

fn base_table(figure: Figure, columns: &[&str]) -> ResultTable {
    let mut t = ResultTable::new(
        columns.iter().map(|c| c.to_string()).collect(),
        ANALYTIC_TOL,
    );
    t.prob_groups.push(vec![1, 2]);
    let p = ConstantDriveParams::reference_case();
    t.push_meta("figure", figure.name());
    t.push_meta("version", env!("CARGO_PKG_VERSION"));
    t.push_meta("capacitance", p.capacitance);
    t.push_meta("r0", p.r0);
    t.push_meta("r1", p.r1);
    t.push_meta("tau0", p.tau0);
    t.push_meta("v0", p.v0);
    t.push_meta("va", p.va);
    t
}

pub fn table(figure: Figure) -> Result<ResultTable, CliError> {
    let p = ConstantDriveParams::reference_case();
    let err = |e| CliError::engine(figure.name(), e);
    match figure {
        Figure::Fig2 => {
            let mut t = base_table(figure, &["time", "p0", "p1"]);
            for time in times() {
                let p0 = p0_constant_voltage(&p, time).map_err(err)?;
                t.push_row(vec![time, p0, 1.0 - p0]);
            }
            Ok(t)
        }
        Figure::Fig3 => {
            let mean = mean_switching_time(&p, SATURATION_TIME).map_err(err)?;
            let plateau = p0_constant_voltage(&p, SATURATION_TIME).map_err(err)?;
            let mut t = base_table(figure, &["time", "p0", "p1", "exp_decay", "anchored_decay"]);
            t.push_meta("saturation_time", SATURATION_TIME);
            t.push_meta("mean_switching_time", mean);
            t.push_meta("p0_saturation", plateau);
            for time in times() {
                let p0 = p0_constant_voltage(&p, time).map_err(err)?;
                let decay = (-time / mean).exp();
                t.push_row(vec![
                    time,
                    p0,
                    1.0 - p0,
                    decay,
                    plateau + (1.0 - plateau) * decay,
                ]);
            }
            Ok(t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relaxation_rows_cover_thirty_milliseconds() {
        let t = table(Figure::Fig2).unwrap();
        assert_eq!(t.rows.len(), ROWS + 1);
        assert_eq!(t.rows[0][1], 1.0);
        assert_eq!(t.rows[ROWS][0], T_END);
        assert_eq!(t.check_probabilities(), None);
    }

    #[test]
    fn decay_table_carries_mean_switching_time() {
        let t = table(Figure::Fig3).unwrap();
        let mean: f64 = t
            .meta
            .iter()
            .find(|(k, _)| k == "mean_switching_time")
            .unwrap()
            .1
            .parse()
            .unwrap();
        assert!((mean - 5.3e-3).abs() <= 0.1e-3, "{mean}");
        assert_eq!(t.rows[0][3], 1.0);
        assert_eq!(t.rows[0][4], 1.0);
    }
}
