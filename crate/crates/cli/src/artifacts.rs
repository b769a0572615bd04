//! Artifact files: atomic writes and the CSV records the driver emits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DATASET: &str = "dataset.csv";
pub const CHECKPOINT: &str = "model.ckpt";
pub const LOSS_HISTORY: &str = "loss_history.csv";
pub const METRICS: &str = "metrics.csv";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const PARSEVAL: &str = "parseval.csv";
pub const DECOMPOSITION: &str = "decomposition.csv";
pub const TRUNCATION_SWEEP: &str = "truncation_sweep.csv";
pub const CONFIG_ECHO: &str = "config.toml";

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(format!("cannot write in {}: {e}", dir.display())))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))
}

pub fn in_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub loss: f64,
}

/// Per-time means and 3σ bands over the evaluation repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub t: f64,
    pub l2_mean: f64,
    pub l2_3sig: f64,
    pub rel_mean: f64,
    pub rel_3sig: f64,
    pub w2_mean: f64,
    pub w2_3sig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsevalRow {
    pub t: f64,
    pub retained_energy: f64,
    pub second_moment: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub p: usize,
    pub e_trunc: f64,
    pub e_approx: f64,
    pub e_recon: f64,
    pub total: f64,
    pub total_se: f64,
    /// `E_trunc + E_approx + E_recon + 3·SE`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: usize,
    pub e_trunc: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for row in rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    })
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}
