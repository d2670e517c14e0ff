//! Per-iteration metrics rows and their CSV form.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const HEADER: [&str; 13] = [
    "iteration",
    "env_steps",
    "mean_true_return",
    "normalized_score",
    "wd_estimate",
    "gp_value",
    "disc_loss",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "wall_ms",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub env_steps: usize,
    pub mean_true_return: f64,
    pub normalized_score: f64,
    pub wd_estimate: f64,
    pub gp_value: f64,
    pub disc_loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub wall_ms: u64,
}

impl MetricsRow {
    /// Name of the first non-finite field, if any.
    pub fn non_finite_field(&self) -> Option<&'static str> {
        let fields = [
            self.mean_true_return,
            self.normalized_score,
            self.wd_estimate,
            self.gp_value,
            self.disc_loss,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.approx_kl,
            self.clip_fraction,
        ];
        fields
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| HEADER[i + 2])
    }
}

/// Streams rows to a CSV file with LF line endings, flushing after each.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
    path: PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        inner.write_record(HEADER).map_err(|e| csv_write(path, e))?;
        let mut w = Self {
            inner,
            path: path.to_path_buf(),
        };
        w.flush()?;
        Ok(w)
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.serialize(row).map_err(|e| csv_write(&self.path, e))?;
        self.flush()
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))
    }
}

fn csv_write(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        detail: e.to_string(),
    }
}

/// Read a metrics file, checking the header and every row.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let csv_err = |line: u64, detail: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let file = File::open(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(csv_err(1, format!("header must be {}", HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: MetricsRow = rec
            .deserialize(Some(&header))
            .map_err(|e| csv_err(line, e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}
