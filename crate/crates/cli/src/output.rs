//! CSV tables and run manifests.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! reader never sees a half-written output. Numbers are printed with Rust's
//! shortest round-trip formatting, which makes identical runs byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::config::ExperimentConfig;
use crate::CliError;

/// An in-memory CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(v) => v.to_string(),
                    Cell::Num(v) => format!("{v:e}"),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::Io(format!("temp file in {}: {e}", dir.display())))?;
    tmp.write_all(contents)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("rename into {}: {e}", path.display())))?;
    Ok(())
}

/// SHA-256 of the canonical JSON form of the resolved config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    // The output directory does not affect results.
    let mut canon = cfg.clone();
    canon.out_dir = PathBuf::new();
    let json = serde_json::to_vec(&canon).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

pub const SEED_DERIVATION: &str =
    "ampsi_core::rng::stream_seed(master_seed, trial, batch, stream); streams: signal=1, si_noise=2, matrix=3, measurement_noise=4";

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub tool_version: &'static str,
    pub core_version: &'static str,
    pub config_hash: String,
    pub master_seed: u64,
    pub se_seed: u64,
    pub seed_derivation: &'static str,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.kind.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            core_version: ampsi_core::VERSION,
            config_hash: config_hash(cfg),
            master_seed: cfg.seed,
            se_seed: cfg.se.seed,
            seed_derivation: SEED_DERIVATION,
            config: cfg.clone(),
            outputs: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Writes each table as `<dir>/<name>.csv` and the manifest as
/// `<dir>/<experiment>_manifest.json`. Returns the manifest path.
pub fn persist(dir: &Path, tables: &[(&str, &Table)], manifest: &mut Manifest) -> Result<PathBuf, CliError> {
    for (name, table) in tables {
        let path = dir.join(format!("{name}.csv"));
        write_atomic(&path, table.to_csv().as_bytes())?;
        manifest.outputs.push(path.display().to_string());
    }
    let path = dir.join(format!("{}_manifest.json", manifest.experiment));
    write_atomic(&path, manifest.to_json().as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;

    #[test]
    fn csv_round_trips_floats() {
        let mut t = Table::new(&["i", "v", "s"]);
        t.push(vec![3usize.into(), 0.1f64.into(), "x".into()]);
        t.push(vec![4usize.into(), (-1.5e-300f64).into(), "y".into()]);
        let csv = t.to_csv();
        let second: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(second[1].parse::<f64>().unwrap(), 0.1);
        let third: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(third[1].parse::<f64>().unwrap(), -1.5e-300);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::preset(ExperimentKind::Fig4);
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(config_hash(&a), config_hash(&b));
        b.trials += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
