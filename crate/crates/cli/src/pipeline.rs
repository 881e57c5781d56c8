//! Multi-batch recovery of a BDD signal sequence.
//!
//! Batch 1 runs plain AMP. Each later batch of the AMP-SI arm uses the
//! previous batch's final pseudo-data as SI, with that batch's final `λ²` as
//! the SI noise variance. The plain-AMP arm never sees SI. Both arms draw the
//! same signals, matrices and noise for a given trial, so their first batch
//! is bit-identical.

use std::time::Instant;

use ampsi_core::amp::{run_no_si, run_with_si};
use ampsi_core::measurement::{make_dense, make_toeplitz, measure};
use ampsi_core::models::{sample_bdd_initial, sample_bdd_step};
use ampsi_core::rng::{stream_seed, Stream};
use ampsi_core::stats::{dist_sq, norm_sq};
use ampsi_core::{AmpConfig, BddPrior, MeasurementOperator, PriorModel, SideInfo};

use crate::config::MatrixKind;
use crate::CliError;

/// One recovered batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    /// 1-based.
    pub batch: usize,
    pub truth: Vec<f64>,
    pub si: Option<Vec<f64>>,
    pub sigma_hat_sq: Option<f64>,
    pub estimate: Vec<f64>,
    pub pseudo: Vec<f64>,
    pub final_lambda_sq: f64,
    /// `‖xᵗ − x‖² / N` after each iteration.
    pub mse_trace: Vec<f64>,
    pub seconds: f64,
}

impl BatchRecord {
    /// `‖x̂ − x‖² / N`.
    pub fn mse(&self) -> f64 {
        dist_sq(&self.estimate, &self.truth) / self.truth.len() as f64
    }

    /// `‖x̂ − x‖² / ‖x‖²`; zero-energy truth gives the plain squared error.
    pub fn normalized_mse(&self) -> f64 {
        let e = norm_sq(&self.truth);
        let err = dist_sq(&self.estimate, &self.truth);
        if e > 0.0 {
            err / e
        } else {
            err
        }
    }

    pub fn energy(&self) -> f64 {
        norm_sq(&self.truth) / self.truth.len() as f64
    }
}

/// Measurement setup shared by every batch of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub prior: BddPrior,
    pub n: usize,
    /// Rows for dense matrices; ignored for Toeplitz.
    pub m: usize,
    pub pilot_len: usize,
    pub matrix: MatrixKind,
    pub sigma_z: f64,
    pub batches: usize,
    pub amp: AmpConfig,
}

impl ChainSpec {
    fn operator(&self, seed: u64) -> ampsi_core::Result<MeasurementOperator> {
        match self.matrix {
            MatrixKind::Dense => make_dense(self.m, self.n, seed),
            MatrixKind::Toeplitz => make_toeplitz(self.pilot_len, self.n, seed),
        }
    }
}

/// The signal sequence of one trial.
pub fn signal_sequence(prior: BddPrior, n: usize, batches: usize, master: u64, trial: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(batches);
    for b in 1..=batches as u64 {
        let seed = stream_seed(master, trial, b, Stream::Signal);
        let x = match out.last() {
            None => sample_bdd_initial(prior, n, seed),
            Some(prev) => sample_bdd_step(prior, prev, seed).0,
        };
        out.push(x);
    }
    out
}

/// Runs one arm of one trial.
pub fn run_chain(spec: &ChainSpec, master: u64, trial: u64, use_si: bool) -> ampsi_core::Result<Vec<BatchRecord>> {
    Ok(run_arms(spec, master, trial, &[use_si])?.pop().unwrap())
}

/// Runs several arms of one trial in lockstep, sharing each batch's matrix
/// and measurements. `arms[k]` says whether arm `k` chains SI.
pub fn run_arms(spec: &ChainSpec, master: u64, trial: u64, arms: &[bool]) -> ampsi_core::Result<Vec<Vec<BatchRecord>>> {
    let prior = PriorModel::Bdd(spec.prior);
    let signals = signal_sequence(spec.prior, spec.n, spec.batches, master, trial);
    let mut records: Vec<Vec<BatchRecord>> = arms.iter().map(|_| Vec::with_capacity(spec.batches)).collect();
    for (k, x) in signals.into_iter().enumerate() {
        let b = k as u64 + 1;
        let shared = Instant::now();
        let op = spec.operator(stream_seed(master, trial, b, Stream::Matrix))?;
        let meas = measure(&op, &x, spec.sigma_z, stream_seed(master, trial, b, Stream::MeasurementNoise))?;
        let setup = shared.elapsed().as_secs_f64();
        for (arm, &use_si) in records.iter_mut().zip(arms) {
            let start = Instant::now();
            let prev = arm.last().filter(|_| use_si);
            let out = match prev {
                None => run_no_si(&op, &meas, prior, &spec.amp, Some(&x))?,
                Some(p) => run_with_si(
                    &op,
                    &meas,
                    prior,
                    SideInfo {
                        values: &p.pseudo,
                        sigma_hat_sq: p.final_lambda_sq,
                    },
                    &spec.amp,
                    Some(&x),
                )?,
            };
            let rec = BatchRecord {
                batch: k + 1,
                si: prev.map(|p| p.pseudo.clone()),
                sigma_hat_sq: prev.map(|p| p.final_lambda_sq),
                truth: x.clone(),
                estimate: out.x_hat,
                pseudo: out.pseudo,
                final_lambda_sq: out.final_lambda_sq,
                mse_trace: out.trace.iter().map(|r| r.mse.unwrap_or(f64::NAN)).collect(),
                seconds: setup + start.elapsed().as_secs_f64(),
            };
            arm.push(rec);
        }
    }
    Ok(records)
}

/// Checks the SI chaining invariant of an AMP-SI arm.
pub fn check_chaining(records: &[BatchRecord]) -> Result<(), CliError> {
    for (k, r) in records.iter().enumerate() {
        if r.batch != k + 1 {
            return Err(CliError::Check(format!("batch index {} at position {k}", r.batch)));
        }
        match (k, &r.si, r.sigma_hat_sq) {
            (0, None, None) => {}
            (0, ..) => return Err(CliError::Check("batch 1 must not use SI".into())),
            (_, Some(si), Some(s)) => {
                let p = &records[k - 1];
                let same = si.len() == p.pseudo.len()
                    && si.iter().zip(&p.pseudo).all(|(a, b)| a.to_bits() == b.to_bits())
                    && s.to_bits() == p.final_lambda_sq.to_bits();
                if !same {
                    return Err(CliError::Check(format!(
                        "batch {} SI is not batch {}'s final pseudo-data and λ²",
                        k + 1,
                        k
                    )));
                }
            }
            _ => return Err(CliError::Check(format!("batch {} is missing its SI", k + 1))),
        }
    }
    Ok(())
}
