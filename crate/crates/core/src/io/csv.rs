//! Per-step observable series as CSV (comma separated, LF, 17 significant digits).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::assembly::Discretization;
use crate::error::Result;
use crate::experiments::{evaluate_observable, observable_columns, Observable};
use crate::materials::MaterialModel;
use crate::timeloop::{State, StepRecord, Trajectory};

/// Streams one row per completed step.
pub struct CsvSeries<W: Write> {
    out: W,
    probes: Vec<Observable>,
}

impl<W: Write> CsvSeries<W> {
    /// Writes the header. With no probes the file stays header-only.
    pub fn new(mut out: W, probes: &[Observable], disc: &Discretization) -> Result<Self> {
        let mut header = vec!["step".to_string(), "time".to_string()];
        for p in probes {
            header.extend(observable_columns(p, &disc.mesh));
        }
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvSeries { out, probes: probes.to_vec() })
    }

    pub fn is_header_only(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn write_step(&mut self, disc: &Discretization, model: &MaterialModel, state: &State, record: &StepRecord) -> Result<()> {
        if self.probes.is_empty() {
            return Ok(());
        }
        let mut row = format!("{},{:.16e}", record.step, record.time);
        for p in &self.probes {
            for v in evaluate_observable(p, disc, model, state, record) {
                row.push_str(&format!(",{v:.16e}"));
            }
        }
        writeln!(self.out, "{row}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes a finished trajectory. Returns `false` when the probe list was empty
/// and only the header was written.
pub fn write_csv_series(trajectory: &Trajectory, disc: &Discretization, model: &MaterialModel, probes: &[Observable], path: &Path) -> Result<bool> {
    let mut series = CsvSeries::new(BufWriter::new(File::create(path)?), probes, disc)?;
    for rec in &trajectory.records {
        series.write_step(disc, model, &trajectory.states[rec.step], rec)?;
    }
    let wrote_rows = !series.is_header_only();
    series.finish()?;
    Ok(wrote_rows)
}
