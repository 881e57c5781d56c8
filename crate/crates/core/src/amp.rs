//! AMP and AMP-SI iterations.
//!
//! Starting from `x⁰ = 0`, for `t ≥ 0`:
//!
//! ```text
//! rᵗ     = y − A xᵗ + (rᵗ⁻¹ / δ) ⟨η′ₜ₋₁(xᵗ⁻¹ + Aᵀrᵗ⁻¹, x̃)⟩
//! xᵗ⁺¹   = η_t(xᵗ + Aᵀrᵗ, x̃)
//! ```
//!
//! with the Onsager term absent at `t = 0`. With damping `β > 0` the update
//! becomes `xᵗ⁺¹ = β xᵗ + (1 − β) η_t(·)`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use crate::denoise::{Denoiser, Prepared};
use crate::error::{invalid, Error, Result};
use crate::measurement::{MeasurementOperator, Measurements};
use crate::stats::{dist_sq, norm_sq};

/// How the pseudo-data noise level `λ_t²` fed to the denoiser is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaMode {
    /// `λ_t² = ‖rᵗ‖² / M`.
    EmpiricalResidual,
    /// A precomputed schedule, typically from state evolution. Iterations
    /// beyond its end reuse the last entry.
    Schedule(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig {
    pub max_iters: usize,
    /// Damping `β ∈ [0, 1)`; 0 disables damping.
    pub damping: f64,
    pub lambda_mode: LambdaMode,
    /// Relative change `‖xᵗ⁺¹ − xᵗ‖ / ‖xᵗ‖` below which iteration stops.
    /// Zero runs all `max_iters` iterations.
    pub convergence_tol: f64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            max_iters: 30,
            damping: 0.0,
            lambda_mode: LambdaMode::EmpiricalResidual,
            convergence_tol: 1e-6,
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(invalid("damping", "must lie in [0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if let LambdaMode::Schedule(s) = &self.lambda_mode {
            if s.is_empty() || s.iter().any(|v| !(*v >= 0.0)) {
                return Err(invalid("lambda_mode", "schedule must be non-empty and non-negative"));
            }
        }
        Ok(())
    }
}

/// Side information vector and the variance of its noise.
#[derive(Debug, Clone, Copy)]
pub struct SideInfo<'a> {
    pub values: &'a [f64],
    pub sigma_hat_sq: f64,
}

/// One AMP step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// `λ_t²` used by the denoiser at this step.
    pub lambda_sq: f64,
    /// `‖rᵗ‖² / M`.
    pub residual_energy: f64,
    /// `‖xᵗ + Aᵀrᵗ − x‖² / N`, when the truth is known.
    pub pseudo_error: Option<f64>,
    /// `‖xᵗ⁺¹ − x‖² / N`, when the truth is known.
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpOutcome {
    pub x_hat: Vec<f64>,
    /// Pseudo-data `xᵀ + Aᵀrᵀ` of the final step.
    pub pseudo: Vec<f64>,
    /// `λ²` used at the final step; the noise level of `pseudo`.
    pub final_lambda_sq: f64,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

/// Runs AMP-SI when `si` is given, plain AMP otherwise.
///
/// The denoiser must match: [`Denoiser::WithSi`] needs `si`,
/// [`Denoiser::NoSi`] ignores it.
pub fn amp_run(
    op: &MeasurementOperator,
    meas: &Measurements,
    denoiser: &Denoiser,
    si: Option<&[f64]>,
    cfg: &AmpConfig,
    truth: Option<&[f64]>,
) -> Result<AmpOutcome> {
    cfg.validate()?;
    let (m, n) = (op.rows(), op.cols());
    if meas.y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: meas.y.len(),
        });
    }
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: t.len(),
            });
        }
    }
    let zeros;
    let si_values: &[f64] = match (denoiser.uses_si(), si) {
        (true, Some(v)) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: v.len(),
                });
            }
            v
        }
        (true, None) => return Err(invalid("si", "AMP-SI needs a side-information vector")),
        (false, _) => {
            zeros = vec![0.0; n];
            &zeros
        }
    };
    let delta = op.delta();

    let mut x = vec![0.0; n];
    let mut r = vec![0.0; m];
    let mut r_prev = vec![0.0; m];
    let mut ax = vec![0.0; m];
    let mut pseudo = vec![0.0; n];
    let mut x_next = vec![0.0; n];
    let mut onsager = 0.0;
    let mut lambda0_sq = None;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    let mut last_lambda_sq = 0.0;

    for t in 0..cfg.max_iters {
        op.apply_into(&x, &mut ax)?;
        for i in 0..m {
            r[i] = meas.y[i] - ax[i] + onsager * r_prev[i];
        }
        op.apply_adjoint_into(&r, &mut pseudo)?;
        for (p, xi) in pseudo.iter_mut().zip(&x) {
            *p += xi;
        }
        let residual_energy = norm_sq(&r) / m as f64;
        let lambda_sq = match &cfg.lambda_mode {
            LambdaMode::EmpiricalResidual => residual_energy,
            LambdaMode::Schedule(s) => s[t.min(s.len() - 1)],
        };
        let l0 = *lambda0_sq.get_or_insert(lambda_sq);
        if !lambda_sq.is_finite() || lambda_sq > 1e6 * l0.max(f64::MIN_POSITIVE) {
            return Err(Error::Divergence {
                iteration: t,
                reason: "noise level exploded",
            });
        }
        last_lambda_sq = lambda_sq;

        let prepared: Prepared = denoiser.prepare(lambda_sq);
        let mut deriv_sum = 0.0;
        for ((xn, &p), &b) in x_next.iter_mut().zip(&pseudo).zip(si_values) {
            let (eta, d) = prepared.eval(p, b);
            *xn = eta;
            deriv_sum += d;
        }
        if cfg.damping > 0.0 {
            let beta = cfg.damping;
            for (xn, &xo) in x_next.iter_mut().zip(&x) {
                *xn = beta * xo + (1.0 - beta) * *xn;
            }
        }
        if x_next.iter().any(|v| !v.is_finite()) || !deriv_sum.is_finite() {
            return Err(Error::Divergence {
                iteration: t,
                reason: "non-finite estimate",
            });
        }

        let change = dist_sq(&x_next, &x).sqrt() / norm_sq(&x).sqrt().max(1e-12);
        trace.push(IterationRecord {
            lambda_sq,
            residual_energy,
            pseudo_error: truth.map(|xt| dist_sq(&pseudo, xt) / n as f64),
            mse: truth.map(|xt| dist_sq(&x_next, xt) / n as f64),
        });

        onsager = deriv_sum / n as f64 / delta;
        core::mem::swap(&mut r_prev, &mut r);
        core::mem::swap(&mut x, &mut x_next);
        if cfg.convergence_tol > 0.0 && t > 0 && change < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(AmpOutcome {
        x_hat: x,
        pseudo,
        final_lambda_sq: last_lambda_sq,
        trace,
        converged,
    })
}

/// AMP-SI with the prior's conditional denoiser for `si`.
pub fn run_with_si(
    op: &MeasurementOperator,
    meas: &Measurements,
    prior: crate::models::PriorModel,
    si: SideInfo<'_>,
    cfg: &AmpConfig,
    truth: Option<&[f64]>,
) -> Result<AmpOutcome> {
    let den = Denoiser::with_si(prior, si.sigma_hat_sq)?;
    amp_run(op, meas, &den, Some(si.values), cfg, truth)
}

/// Plain AMP with the prior's MMSE denoiser and no side information.
pub fn run_no_si(
    op: &MeasurementOperator,
    meas: &Measurements,
    prior: crate::models::PriorModel,
    cfg: &AmpConfig,
    truth: Option<&[f64]>,
) -> Result<AmpOutcome> {
    amp_run(op, meas, &Denoiser::NoSi(prior), None, cfg, truth)
}

/// Onsager coefficient `(1/δ) · (1/N) Σ η′(pseudoₙ, x̃ₙ)`.
pub fn onsager_coeff(pseudo: &[f64], si: &[f64], prepared: &Prepared, delta: f64) -> Result<f64> {
    if pseudo.len() != si.len() {
        return Err(Error::DimensionMismatch {
            expected: pseudo.len(),
            actual: si.len(),
        });
    }
    if pseudo.is_empty() {
        return Err(invalid("pseudo", "must be non-empty"));
    }
    let sum: f64 = pseudo
        .iter()
        .zip(si)
        .map(|(&a, &b)| prepared.eval(a, b).1)
        .sum();
    Ok(sum / pseudo.len() as f64 / delta)
}
