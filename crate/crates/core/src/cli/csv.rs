//! Diagnostics series as CSV and as gnuplot data files.
//!
//! Numbers are written with Rust's shortest round-trip formatting, which does
//! not depend on the locale, so `parse_series(series_to_csv(s)) == s` exactly.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::functionals::{DiagnosticsRow, DiagnosticsSeries};
use crate::solver::{Grid, State};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn header() -> String {
    DiagnosticsRow::COLUMNS.join(",")
}

pub fn series_to_csv(series: &DiagnosticsSeries) -> String {
    let mut s = header();
    s.push('\n');
    for row in &series.rows {
        let cells: Vec<String> = row.values().iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn emit_series(series: &DiagnosticsSeries, path: &Path) -> Result<(), CsvError> {
    std::fs::write(path, series_to_csv(series))?;
    Ok(())
}

pub fn parse_series(text: &str) -> Result<DiagnosticsSeries, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == header() => {}
        Some((_, h)) => {
            return Err(CsvError::Format {
                line: 1,
                msg: format!("unexpected header `{h}`"),
            })
        }
        None => {
            return Err(CsvError::Format {
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != DiagnosticsRow::COLUMNS.len() {
            return Err(CsvError::Format {
                line: i + 1,
                msg: format!("{} fields, expected {}", cells.len(), DiagnosticsRow::COLUMNS.len()),
            });
        }
        let mut v = [0.0; 14];
        for (slot, cell) in v.iter_mut().zip(&cells) {
            *slot = cell.parse().map_err(|_| CsvError::Format {
                line: i + 1,
                msg: format!("not a number: `{cell}`"),
            })?;
        }
        rows.push(DiagnosticsRow::from_values(v));
    }
    Ok(DiagnosticsSeries { rows })
}

pub fn read_series(path: &Path) -> Result<DiagnosticsSeries, CsvError> {
    parse_series(&std::fs::read_to_string(path)?)
}

/// Whitespace-separated columns with a `#` header, for `plot 'series.dat' using 1:4`.
pub fn series_plot_data(series: &DiagnosticsSeries) -> String {
    let mut s = format!("# {}\n", DiagnosticsRow::COLUMNS.join(" "));
    for row in &series.rows {
        let cells: Vec<String> = row.values().iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

/// `x u u_t theta` at the cell centres, one blank-line separated block per state.
pub fn profile_plot_data(grid: &Grid, a: f64, states: &[&State]) -> String {
    let mut s = String::from("# x u ut theta\n");
    for (k, state) in states.iter().enumerate() {
        if k > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# t = {:?}", state.t);
        let ut = state.velocity(a);
        for (i, ut) in ut.iter().enumerate() {
            let _ = writeln!(s, "{:?} {:?} {:?} {:?}", grid.x(i), state.u[i], ut, state.theta[i]);
        }
    }
    s
}
