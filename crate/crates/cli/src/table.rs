//! Result tables and their CSV and gnuplot serializations.
//!
//! CSV layout: `# meta: key=value;...`, a header line starting with `time`,
//! then one record per output time with every value written as `{:.16e}`
//! (17 significant digits, so values round-trip exactly).

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Column names; the first is always `time`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Ordered `key=value` metadata.
    pub meta: Vec<(String, String)>,
    /// Column groups that hold a probability distribution.
    pub prob_groups: Vec<Vec<usize>>,
    /// Allowed `|sum - 1|` for every group on every row.
    pub prob_tolerance: f64,
}

impl ResultTable {
    pub fn new(columns: Vec<String>, prob_tolerance: f64) -> Self {
        debug_assert_eq!(columns.first().map(String::as_str), Some("time"));
        Self {
            columns,
            rows: Vec::new(),
            meta: Vec::new(),
            prob_groups: Vec::new(),
            prob_tolerance,
        }
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// First `(row, group, sum)` breaking the probability-sum invariant.
    pub fn check_probabilities(&self) -> Option<(usize, usize, f64)> {
        for (r, row) in self.rows.iter().enumerate() {
            for (g, group) in self.prob_groups.iter().enumerate() {
                let sum: f64 = group.iter().map(|&c| row[c]).sum();
                if !((sum - 1.0).abs() <= self.prob_tolerance) {
                    return Some((r, g, sum));
                }
            }
        }
        None
    }

    fn meta_line(&self) -> String {
        let mut meta = self.meta.clone();
        meta.push(("prob_sum_tol".into(), format!("{:e}", self.prob_tolerance)));
        let groups: Vec<String> = self
            .prob_groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|&c| self.columns[c].as_str())
                    .collect::<Vec<_>>()
                    .join("+")
            })
            .collect();
        if !groups.is_empty() {
            meta.push(("prob_groups".into(), groups.join(",")));
        }
        let body: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# meta: {}", body.join(";"))
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.meta_line();
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v:.16e}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    /// Whitespace-separated columns with `#` comment headers.
    pub fn to_gnuplot(&self) -> String {
        let mut out = self.meta_line();
        out.push('\n');
        out.push_str("# ");
        out.push_str(&self.columns.join(" "));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
