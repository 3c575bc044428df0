//! CSV and snapshot persistence.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::evolve::{Companion, SimState};
use crate::flux_diag::{DiagnosticsRecord, CSV_COLUMNS, CSV_SCHEMA};
use crate::snapshot::write_snapshot;

use super::HarnessError;

/// Shortest round-trip float formatting used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes a header comment line followed by a CSV table.
pub fn write_table<W: Write>(
    mut out: W,
    comment: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    writeln!(out, "# {comment}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file(
    path: &Path,
    comment: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    let f = BufWriter::new(File::create(path)?);
    write_table(f, comment, header, rows)
}

pub fn write_diagnostics<W: Write>(out: W, records: &[DiagnosticsRecord<f64>]) -> Result<(), HarnessError> {
    write_table(out, CSV_SCHEMA, &CSV_COLUMNS, records.iter().map(|r| r.csv_fields()))
}

/// `(t, column)` pairs from a diagnostics CSV; empty cells are skipped.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = rd.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Study(format!("column {name:?} not found in {}", path.display())))
    };
    let (it, ic) = (find("t")?, find(column)?);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let cell = rec.get(ic).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| HarnessError::Study(format!("bad number {s:?} in {}", path.display())))
        };
        out.push((parse(rec.get(it).unwrap_or(""))?, parse(cell)?));
    }
    Ok(out)
}

/// `u, v_x, v_y` (transformed) or `u, c` (original).
pub fn write_state_snapshot(path: &Path, state: &SimState<f64>) -> io::Result<()> {
    let f = BufWriter::new(File::create(path)?);
    match &state.companion {
        Companion::Velocity(v) => write_snapshot(f, &[&state.u, &v.x, &v.y]),
        Companion::Chemical(c) => write_snapshot(f, &[&state.u, c]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_comment_and_header() {
        let mut buf = Vec::new();
        write_table(&mut buf, "x v1", &["a", "b"], vec![vec!["1e0".into(), String::new()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# x v1\na,b\n1e0,\n");
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
