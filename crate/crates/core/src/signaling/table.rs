use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::bound::{bound, p_max_qubit, per_qubit_power};
use crate::error::{Error, Result};

/// One row of the bound table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub ports: usize,
    pub bound: f64,
    pub p_max_n1_formula: f64,
    pub optimizer_value_if_present: Option<f64>,
    pub bound_fraction: String,
    pub per_qubit_power: f64,
}

/// Rows for `n = 1..=max_n`, `N = 1..=max_ports`. Optimizer values are
/// attached by `(n, N)`.
pub fn bound_table(max_n: usize, max_ports: usize, optimizer: &BTreeMap<(usize, usize), f64>) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for n in 1..=max_n {
        for ports in 1..=max_ports {
            let b = bound(n, ports)?;
            rows.push(BoundRow {
                n,
                ports,
                bound: b.value(),
                p_max_n1_formula: p_max_qubit(ports),
                optimizer_value_if_present: optimizer.get(&(n, ports)).copied(),
                bound_fraction: b.to_string(),
                per_qubit_power: per_qubit_power(n, ports),
            });
        }
    }
    Ok(rows)
}

/// Writes the table as CSV with a header row.
pub fn write_bound_table<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format { path: "bound table".into(), message: e.to_string() })?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format { path: "bound table".into(), message: e.to_string() }
}
