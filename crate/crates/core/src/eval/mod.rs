//! Evaluation harness: metrics, spectrum maps, measured-RFI ingest, matrix
//! CSV I/O and the parameter sweep.

pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod spectrum;

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::{Error, Result};

pub use experiment::{run_experiment, write_csv, ExperimentConfig, Method, RunRecord, SweepOutcome};
pub use ingest::{export_measured_rfi, ingest_measured_rfi, MeasuredRfi};
pub use metrics::{inr_db, nre_db, sinr_db};
pub use spectrum::spectrum_map;

/// Writes a matrix as CSV, one matrix row per line, shortest round-trip
/// decimal formatting.
pub fn write_matrix_csv<W: Write>(out: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless numeric CSV written by [`write_matrix_csv`].
pub fn read_matrix_csv<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Io(e.into()))?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("bad number {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::mismatch(format!("{} columns", first.len()), format!("{}", row.len())));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trip() {
        let m = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 0.1) * (j as f64 - 1.7) / 3.0);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        assert_eq!(read_matrix_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn ragged_csv_rejected() {
        assert!(read_matrix_csv("1,2\n3\n".as_bytes()).is_err());
    }
}
