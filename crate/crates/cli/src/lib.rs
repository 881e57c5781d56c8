//! Experiment driver for AMP with side information: configuration, batch
//! pipelines, CSV and manifest output. The binary in `main.rs` is a thin
//! command-line layer over [`run`].

pub mod config;
pub mod experiments;
pub mod golden;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use config::{ExperimentConfig, ExperimentKind};
use output::{persist, Manifest, Timing};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] ampsi_core::Error),
    #[error("i/o: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// Process exit status: 2 for usage errors, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Divergence(_) => 3,
            _ => 1,
        }
    }
}

/// Runs an experiment and persists its tables and manifest. Returns the
/// manifest path.
pub fn run(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let (tables, notes) = match cfg.kind {
        ExperimentKind::Fig4 => {
            let r = experiments::run_fig4(cfg)?;
            (r.tables, r.notes)
        }
        ExperimentKind::Fig5 => {
            let r = experiments::run_fig5(cfg)?;
            (r.tables, r.notes)
        }
        ExperimentKind::Channel => {
            let r = experiments::run_channel_estimation(cfg)?;
            (r.tables, r.notes)
        }
        ExperimentKind::Table2 => {
            let r = experiments::run_table2(cfg)?;
            (r.tables, r.notes)
        }
        ExperimentKind::Phase => (experiments::run_phase_grid(cfg)?.tables, Vec::new()),
        ExperimentKind::Se => (experiments::run_se(cfg)?.tables, Vec::new()),
    };
    let mut manifest = Manifest::new(cfg);
    manifest.notes = notes;
    manifest.timings.push(Timing {
        stage: cfg.kind.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    });
    let refs: Vec<(&str, &output::Table)> = tables.iter().map(|(n, t)| (n.as_str(), t)).collect();
    persist(&cfg.out_dir, &refs, &mut manifest)
}
