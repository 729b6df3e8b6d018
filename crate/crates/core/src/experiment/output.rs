//! CSV output for sweep and ROC results.
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a written
//! file gives back the exact values.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{CurvePoint, ExperimentConfig, RocPoint};
use crate::{Error, Result};

pub const SWEEP_COLUMNS: [&str; 10] = [
    "snr_db",
    "pmd_empirical",
    "pmd_theory",
    "pfa_empirical",
    "trials",
    "ci_halfwidth",
    "standard",
    "cp_ratio",
    "channel",
    "seed",
];

pub const ROC_COLUMNS: [&str; 9] = [
    "snr_db",
    "p_fa_target",
    "p_fa_empirical",
    "p_d_empirical",
    "p_d_theory",
    "standard",
    "cp_ratio",
    "channel",
    "seed",
];

/// Per-run columns appended to every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLabels {
    pub standard: String,
    pub cp_ratio: String,
    pub channel: String,
    pub seed: u64,
}

impl RunLabels {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        RunLabels {
            standard: cfg.standard.to_string(),
            cp_ratio: cfg.cp_ratio.to_string(),
            channel: cfg.channel.clone(),
            seed: cfg.seed,
        }
    }

    fn fields(&self) -> [String; 4] {
        [
            self.standard.clone(),
            self.cp_ratio.clone(),
            self.channel.clone(),
            self.seed.to_string(),
        ]
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// A row type that can be written to one of the two CSV schemas.
pub trait CsvRow {
    const COLUMNS: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for CurvePoint {
    const COLUMNS: &'static [&'static str] = &SWEEP_COLUMNS;

    fn fields(&self) -> Vec<String> {
        vec![
            self.snr_db.to_string(),
            self.pmd_empirical.to_string(),
            opt(self.pmd_theory),
            self.pfa_empirical.to_string(),
            self.trials.to_string(),
            self.ci_halfwidth.to_string(),
        ]
    }
}

impl CsvRow for RocPoint {
    const COLUMNS: &'static [&'static str] = &ROC_COLUMNS;

    fn fields(&self) -> Vec<String> {
        vec![
            self.snr_db.to_string(),
            self.p_fa_target.to_string(),
            self.p_fa_empirical.to_string(),
            self.p_d_empirical.to_string(),
            opt(self.p_d_theory),
        ]
    }
}

/// Streams rows to a writer, flushing after each so partial results survive
/// an aborted run.
pub struct CsvSink<W: Write> {
    writer: ::csv::Writer<W>,
    path: PathBuf,
}

impl CsvSink<File> {
    pub fn create<R: CsvRow>(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::new::<R>(file, path)
    }
}

impl<W: Write> CsvSink<W> {
    /// Writes the header for `R` immediately. `path` is only used in errors.
    pub fn new<R: CsvRow>(inner: W, path: &Path) -> Result<Self> {
        let mut sink = CsvSink {
            writer: ::csv::Writer::from_writer(inner),
            path: path.to_path_buf(),
        };
        sink.write_record(R::COLUMNS.iter().map(|s| s.to_string()).collect())?;
        Ok(sink)
    }

    pub fn write<R: CsvRow>(&mut self, row: &R, labels: &RunLabels) -> Result<()> {
        let mut fields = row.fields();
        fields.extend(labels.fields());
        self.write_record(fields)
    }

    fn write_record(&mut self, fields: Vec<String>) -> Result<()> {
        let path = &self.path;
        self.writer.write_record(&fields).map_err(|e| Error::Csv {
            path: path.clone(),
            source: e,
        })?;
        self.writer.flush().map_err(|e| Error::io(path.clone(), e))
    }

    pub fn into_inner(self) -> Result<W> {
        let path = self.path;
        self.writer
            .into_inner()
            .map_err(|e| Error::io(path, e.into_error()))
    }
}

/// Writes a header plus one row per point.
pub fn emit_csv<R: CsvRow>(points: &[R], labels: &RunLabels, path: &Path) -> Result<()> {
    let mut sink = CsvSink::create::<R>(path)?;
    for p in points {
        sink.write(p, labels)?;
    }
    Ok(())
}

/// Same as [`emit_csv`] into memory.
pub fn csv_string<R: CsvRow>(points: &[R], labels: &RunLabels) -> Result<String> {
    let mut sink = CsvSink::new::<R>(Vec::new(), Path::new("<memory>"))?;
    for p in points {
        sink.write(p, labels)?;
    }
    let bytes = sink.into_inner()?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
