//! Tabular experiment output. Every experiment emits flat [`ResultRow`]s;
//! the timestamp is deliberately the last column so that all metric columns
//! can be compared byte-for-byte between runs regardless of when or with how
//! many workers they executed.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub instance: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub timestamp: String,
}

impl ResultRow {
    pub fn new(
        experiment: impl Into<String>,
        instance: impl Into<String>,
        metric: impl Into<String>,
        value: f64,
        stderr: f64,
        n_samples: u64,
        seed: u64,
    ) -> Self {
        ResultRow {
            experiment: experiment.into(),
            instance: instance.into(),
            metric: metric.into(),
            value,
            stderr,
            n_samples,
            seed,
            timestamp: unix_timestamp(),
        }
    }

    /// Copy with the timestamp cleared; rows from reruns compare equal.
    pub fn comparable(&self) -> ResultRow {
        ResultRow {
            timestamp: String::new(),
            ..self.clone()
        }
    }
}

/// Seconds since the Unix epoch as a string.
pub fn unix_timestamp() -> String {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default()
}

fn csv_error(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_path(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, file)
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Config(format!("csv produced invalid utf-8: {e}")))
}

/// CSV with the trailing timestamp column blanked on every row; two
/// equivalent runs must produce byte-identical output here.
pub fn comparable_csv(rows: &[ResultRow]) -> Result<String> {
    let stripped: Vec<ResultRow> = rows.iter().map(ResultRow::comparable).collect();
    csv_string(&stripped)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut input = csv::Reader::from_reader(reader);
    input
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(csv_error)
}

pub fn write_json<T: Serialize>(value: &T, writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(writer, value)
        .map_err(|e| Error::Config(format!("json serialization: {e}")))
}

pub fn write_json_path<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_json(value, file)?;
    Ok(())
}
