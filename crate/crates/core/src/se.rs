//! Monte-Carlo state evolution.
//!
//! ```text
//! λ₀²     = σ_z² + E[X²] / δ
//! λ²ₜ₊₁   = σ_z² + (1/δ) E[(η_t(X + λ_t Z₁, X_ref + σ̂ Z₂) − X)²]
//! ```
//!
//! `X_ref` is `X` itself for the BG and GG models and the previous-batch
//! value `X_p` for BDD. The expectation is estimated from one fixed set of
//! draws per run (common random numbers), so the iterated map is a
//! deterministic function of `λ²` and plain fixed-point iteration settles.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::denoise::Denoiser;
use crate::error::{invalid, Error, Result};
use crate::gaussian::matched_filter_var;
use crate::models::{BddPrior, BgPrior, PriorModel};
use crate::rng::rng_from_seed;
use crate::stats::RunningStats;

pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeEstimate {
    pub lambda_sq: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeTrace {
    /// `λ₀², λ₁², …`; entry 0 is analytic.
    pub lambda_sq_seq: Vec<f64>,
    /// Standard error of each Monte-Carlo entry; `mc_stderr[0] = 0`.
    pub mc_stderr: Vec<f64>,
    pub converged: bool,
    pub fixed_point: Option<f64>,
    /// Standard error of the fixed point, propagated through the map's slope.
    pub fixed_point_stderr: Option<f64>,
    pub mc_samples: usize,
    pub delta: f64,
    pub sigma_z_sq: f64,
}

impl SeTrace {
    /// Predicted per-entry MSE `δ(λ_t² − σ_z²)` of the estimate that enters
    /// step `t`.
    pub fn mse_seq(&self) -> Vec<f64> {
        self.lambda_sq_seq
            .iter()
            .map(|l| self.delta * (l - self.sigma_z_sq))
            .collect()
    }

    pub fn last(&self) -> f64 {
        *self.lambda_sq_seq.last().expect("trace holds λ₀²")
    }
}

/// Draws shared by every step of one SE run.
#[derive(Debug, Clone)]
pub struct SeSamples {
    x: Vec<f64>,
    x_ref: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

impl SeSamples {
    /// Five variates are consumed per sample for every model, so that runs
    /// with different priors but one seed stay coupled.
    pub fn draw(prior: PriorModel, mc: usize, seed: u64) -> Result<Self> {
        if mc < MIN_MC_SAMPLES {
            return Err(invalid("mc", "need at least 1000 Monte-Carlo samples"));
        }
        let mut rng = rng_from_seed(seed);
        let mut s = SeSamples {
            x: Vec::with_capacity(mc),
            x_ref: Vec::with_capacity(mc),
            z1: Vec::with_capacity(mc),
            z2: Vec::with_capacity(mc),
        };
        for _ in 0..mc {
            let u: f64 = rng.random();
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let (x, x_ref) = match prior {
                PriorModel::Bg(p) => {
                    let x = if u < p.epsilon() { g1 } else { 0.0 };
                    (x, x)
                }
                PriorModel::Gg(p) => {
                    let x = p.sigma_x_sq().sqrt() * g1;
                    (x, x)
                }
                PriorModel::Bdd(p) => bdd_draw(p, u, g1, g2),
            };
            s.x.push(x);
            s.x_ref.push(x_ref);
            s.z1.push(z1);
            s.z2.push(z2);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `E[(η(X + λZ₁, X_ref + σ̂Z₂) − X)²]` and its standard error.
    fn denoising_error(&self, denoiser: &Denoiser, lambda_sq: f64) -> (f64, f64) {
        let prepared = denoiser.prepare(lambda_sq);
        let lambda = lambda_sq.max(0.0).sqrt();
        let sigma_hat = match denoiser {
            Denoiser::WithSi { sigma_hat_sq, .. } => sigma_hat_sq.sqrt(),
            Denoiser::NoSi(_) => 0.0,
        };
        let mut stats = RunningStats::new();
        for i in 0..self.x.len() {
            let a = self.x[i] + lambda * self.z1[i];
            let b = self.x_ref[i] + sigma_hat * self.z2[i];
            let e = prepared.eta(a, b) - self.x[i];
            stats.push(e * e);
        }
        (stats.mean(), stats.stderr())
    }
}

/// Case draw from `(u, g1, g2)`: returns `(X_c, X_p)`.
fn bdd_draw(p: BddPrior, u: f64, g1: f64, g2: f64) -> (f64, f64) {
    let eps = p.eps();
    let ss = p.sigma_s_sq().sqrt();
    if u < eps[0] {
        (0.0, 0.0)
    } else if u < eps[0] + eps[1] {
        (0.0, ss * g1)
    } else if u < eps[0] + eps[1] + eps[2] {
        let xp = ss * g1;
        (p.rho() * xp + p.sigma_sq().sqrt() * g2, xp)
    } else {
        (ss * g2, 0.0)
    }
}

fn check_channel(delta: f64, sigma_z_sq: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", "must be positive and finite"));
    }
    if !(sigma_z_sq >= 0.0 && sigma_z_sq.is_finite()) {
        return Err(invalid("sigma_z_sq", "must be non-negative and finite"));
    }
    Ok(())
}

fn denoiser_for(prior: PriorModel, sigma_hat_sq: Option<f64>) -> Result<Denoiser> {
    match sigma_hat_sq {
        Some(s) if s.is_finite() => Denoiser::with_si(prior, s),
        _ => Ok(Denoiser::NoSi(prior)),
    }
}

/// `λ₀² = σ_z² + E[X²]/δ`.
pub fn initial_lambda_sq(prior: PriorModel, delta: f64, sigma_z_sq: f64) -> f64 {
    sigma_z_sq + prior.second_moment() / delta
}

/// One step of the recursion with fresh draws. `sigma_hat_sq = None` (or
/// `+∞`) gives the no-SI recursion.
pub fn se_step(
    prior: PriorModel,
    sigma_hat_sq: Option<f64>,
    lambda_sq_prev: f64,
    delta: f64,
    sigma_z_sq: f64,
    mc: usize,
    seed: u64,
) -> Result<SeEstimate> {
    check_channel(delta, sigma_z_sq)?;
    if !(lambda_sq_prev >= 0.0 && lambda_sq_prev.is_finite()) {
        return Err(invalid("lambda_sq_prev", "must be non-negative and finite"));
    }
    let den = denoiser_for(prior, sigma_hat_sq)?;
    let samples = SeSamples::draw(prior, mc, seed)?;
    let (mse, se) = samples.denoising_error(&den, lambda_sq_prev);
    Ok(SeEstimate {
        lambda_sq: sigma_z_sq + mse / delta,
        stderr: se / delta,
    })
}

/// Matched-filter form of the SI step: the two looks collapse into one of
/// variance `λ²σ̂²/(λ² + σ̂²)`, then the no-SI MMSE denoiser applies. Only
/// valid when the SI is the signal plus Gaussian noise.
pub fn se_gaussian_si_step(
    prior: PriorModel,
    sigma_hat_sq: f64,
    lambda_sq_prev: f64,
    delta: f64,
    sigma_z_sq: f64,
    mc: usize,
    seed: u64,
) -> Result<SeEstimate> {
    if !prior.has_gaussian_si() {
        return Err(Error::UnsupportedModel(
            "matched-filter SE needs SI of the form X + noise",
        ));
    }
    check_channel(delta, sigma_z_sq)?;
    if !(sigma_hat_sq >= 0.0) || !(lambda_sq_prev >= 0.0) {
        return Err(invalid("variances", "must be non-negative"));
    }
    let var = if lambda_sq_prev + sigma_hat_sq > 0.0 {
        matched_filter_var(lambda_sq_prev, sigma_hat_sq)?
    } else {
        0.0
    };
    let samples = SeSamples::draw(prior, mc, seed)?;
    let (mse, se) = samples.denoising_error(&Denoiser::NoSi(prior), var);
    Ok(SeEstimate {
        lambda_sq: sigma_z_sq + mse / delta,
        stderr: se / delta,
    })
}

/// Settings shared by [`se_run`] and the grid helpers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeConfig {
    pub t_max: usize,
    pub mc: usize,
    /// Relative change that counts as converged; 0 runs exactly `t_max`
    /// steps.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SeConfig {
    fn default() -> Self {
        Self {
            t_max: 200,
            mc: 100_000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Iterates the recursion from `λ₀²`.
pub fn se_run(
    prior: PriorModel,
    sigma_hat_sq: Option<f64>,
    delta: f64,
    sigma_z_sq: f64,
    cfg: SeConfig,
) -> Result<SeTrace> {
    check_channel(delta, sigma_z_sq)?;
    if cfg.t_max == 0 {
        return Err(invalid("t_max", "must be at least 1"));
    }
    let den = denoiser_for(prior, sigma_hat_sq)?;
    let samples = SeSamples::draw(prior, cfg.mc, cfg.seed)?;
    let map = |l: f64| {
        let (mse, se) = samples.denoising_error(&den, l);
        (sigma_z_sq + mse / delta, se / delta)
    };

    let mut seq = Vec::with_capacity(cfg.t_max + 1);
    let mut errs = Vec::with_capacity(cfg.t_max + 1);
    seq.push(initial_lambda_sq(prior, delta, sigma_z_sq));
    errs.push(0.0);
    let mut converged = false;
    for _ in 0..cfg.t_max {
        let prev = *seq.last().unwrap();
        let (next, se) = map(prev);
        seq.push(next);
        errs.push(se);
        if cfg.tol > 0.0 && (next - prev).abs() < cfg.tol * prev + 1e-14 {
            converged = true;
            break;
        }
    }

    let (fixed_point, fixed_point_stderr) = if converged {
        let l = *seq.last().unwrap();
        let step_se = *errs.last().unwrap();
        let slope = if l > 1e-12 {
            let h = 1e-3 * l;
            (map(l + h).0 - map(l - h).0) / (2.0 * h)
        } else {
            0.0
        };
        let gain = 1.0 / (1.0 - slope.clamp(0.0, 0.99));
        (Some(l), Some(step_se * gain))
    } else {
        (None, None)
    };

    Ok(SeTrace {
        lambda_sq_seq: seq,
        mc_stderr: errs,
        converged,
        fixed_point,
        fixed_point_stderr,
        mc_samples: cfg.mc,
        delta,
        sigma_z_sq,
    })
}

/// SE of the multi-batch pipeline: batch 1 has no SI, batch `b` uses SI
/// with `σ̂² = λ²` at the end of batch `b − 1`. Each batch runs `cfg`
/// unchanged; with `tol = 0` the end is step `t_max`, otherwise the fixed
/// point.
pub fn se_batches(
    prior: PriorModel,
    delta: f64,
    sigma_z_sq: f64,
    batches: usize,
    cfg: SeConfig,
) -> Result<Vec<SeTrace>> {
    let mut out: Vec<SeTrace> = Vec::with_capacity(batches);
    for _ in 0..batches {
        let si = out.last().map(SeTrace::last);
        out.push(se_run(prior, si, delta, sigma_z_sq, cfg)?);
    }
    Ok(out)
}

/// No-SI problem whose SE fixed point coincides with that of the SI problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannel {
    pub delta_eff: f64,
    pub sigma_eff_sq: f64,
    /// Shrink factor `σ̂²/(σ̂² + λ²)`.
    pub mu: f64,
}

pub fn effective_channel(
    delta: f64,
    sigma_z_sq: f64,
    sigma_hat_sq: f64,
    lambda_fixed_sq: f64,
) -> Result<EffectiveChannel> {
    check_channel(delta, sigma_z_sq)?;
    if !(sigma_hat_sq > 0.0) || !(lambda_fixed_sq > 0.0 && lambda_fixed_sq.is_finite()) {
        return Err(invalid("variances", "sigma_hat_sq and lambda_sq must be positive"));
    }
    let mu = if sigma_hat_sq.is_infinite() {
        1.0
    } else {
        sigma_hat_sq / (sigma_hat_sq + lambda_fixed_sq)
    };
    Ok(EffectiveChannel {
        delta_eff: delta / mu,
        sigma_eff_sq: mu * sigma_z_sq,
        mu,
    })
}

/// Prior family swept by the phase diagram: `γ` is the nonzero fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseFamily {
    /// BG with `ε = γ`.
    Bg,
    /// BDD with `ε₂ = ε₄ = 0.01` and `ε₃ = γ − 0.01`.
    Bdd { sigma_s_sq: f64, rho: f64 },
}

impl PhaseFamily {
    pub fn prior(&self, gamma: f64) -> Result<PriorModel> {
        match *self {
            PhaseFamily::Bg => Ok(PriorModel::Bg(BgPrior::new(gamma)?)),
            PhaseFamily::Bdd { sigma_s_sq, rho } => {
                let e3 = gamma - 0.01;
                let e1 = 1.0 - gamma - 0.01;
                if !(e3 >= 0.0 && e1 >= 0.0) {
                    return Err(invalid("gamma", "BDD phase grid needs 0.01 <= gamma <= 0.99"));
                }
                Ok(PriorModel::Bdd(BddPrior::new([e1, 0.01, e3, 0.01], sigma_s_sq, rho)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub delta: f64,
    pub gamma: f64,
    pub batch: usize,
    /// `δ(λ∞² − σ_z²)` at the end of the batch.
    pub mse: f64,
    pub converged: bool,
}

/// Runs the batch chain for one `(δ, γ)` cell and reports the requested
/// batches (1-based).
pub fn phase_cell(
    family: PhaseFamily,
    delta: f64,
    gamma: f64,
    report: &[usize],
    sigma_z: f64,
    cfg: SeConfig,
) -> Result<Vec<PhaseCell>> {
    let last = report.iter().copied().max().unwrap_or(0);
    if last == 0 || report.contains(&0) {
        return Err(invalid("batches", "batch indices are 1-based and non-empty"));
    }
    let prior = family.prior(gamma)?;
    let sz2 = sigma_z * sigma_z;
    let traces = se_batches(prior, delta, sz2, last, cfg)?;
    Ok(report
        .iter()
        .map(|&b| {
            let t = &traces[b - 1];
            PhaseCell {
                delta,
                gamma,
                batch: b,
                mse: delta * (t.last() - sz2),
                converged: t.converged,
            }
        })
        .collect())
}

/// Every cell of `delta_grid × gamma_grid`, with common random numbers.
pub fn phase_grid(
    family: PhaseFamily,
    delta_grid: &[f64],
    gamma_grid: &[f64],
    report: &[usize],
    sigma_z: f64,
    cfg: SeConfig,
) -> Result<Vec<PhaseCell>> {
    if delta_grid.is_empty() || gamma_grid.is_empty() {
        return Err(invalid("grid", "must be non-empty"));
    }
    let mut out = Vec::with_capacity(delta_grid.len() * gamma_grid.len() * report.len());
    for &d in delta_grid {
        for &g in gamma_grid {
            out.extend(phase_cell(family, d, g, report, sigma_z, cfg)?);
        }
    }
    Ok(out)
}

/// Exact no-SI/SI SE step for the GG prior, where the MMSE denoiser is
/// linear: the posterior variance `1/(1/σ_X² + 1/λ² + 1/σ̂²)`.
pub fn gg_step_exact(sigma_x_sq: f64, sigma_hat_sq: f64, lambda_sq: f64, delta: f64, sigma_z_sq: f64) -> f64 {
    let prec = 1.0 / sigma_x_sq + 1.0 / lambda_sq + 1.0 / sigma_hat_sq;
    sigma_z_sq + 1.0 / prec / delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GgPrior;
    use approx::assert_relative_eq;

    fn bg(eps: f64) -> PriorModel {
        PriorModel::Bg(BgPrior::new(eps).unwrap())
    }

    #[test]
    fn initial_values() {
        assert_relative_eq!(initial_lambda_sq(bg(0.3), 0.3, 0.01), 1.01, epsilon = 1e-14);
        let bdd = PriorModel::Bdd(BddPrior::batch_experiment());
        assert_relative_eq!(initial_lambda_sq(bdd, 0.3, 0.077 * 0.077), 0.077 * 0.077 + 0.19 / 0.3, epsilon = 1e-12);
        let tr = se_run(bg(0.3), Some(0.01), 0.3, 0.01, SeConfig { t_max: 3, mc: 2000, tol: 0.0, seed: 1 }).unwrap();
        assert_eq!(tr.lambda_sq_seq[0], 0.01 + 0.3 / 0.3);
        assert_eq!(tr.lambda_sq_seq.len(), 4);
    }

    #[test]
    fn gg_matches_analytic() {
        let gg = PriorModel::Gg(GgPrior::new(1.0).unwrap());
        let est = se_step(gg, Some(0.5), 0.8, 0.5, 0.01, 50_000, 3).unwrap();
        let exact = gg_step_exact(1.0, 0.5, 0.8, 0.5, 0.01);
        assert!((est.lambda_sq - exact).abs() < 3.0 * est.stderr + 1e-12);
    }

    #[test]
    fn noiseless_overdetermined_gg_goes_to_zero() {
        let gg = PriorModel::Gg(GgPrior::new(1.0).unwrap());
        let tr = se_run(gg, None, 2.0, 0.0, SeConfig { t_max: 200, mc: 2000, tol: 1e-6, seed: 2 }).unwrap();
        assert!(tr.last() < 1e-10, "{}", tr.last());
    }

    #[test]
    fn entries_stay_above_noise_floor() {
        let tr = se_run(bg(0.2), Some(0.05), 0.5, 0.04, SeConfig { t_max: 30, mc: 4000, tol: 0.0, seed: 5 }).unwrap();
        assert!(tr.lambda_sq_seq.iter().all(|&l| l >= 0.04));
    }

    #[test]
    fn perfect_si_removes_denoising_error() {
        let e = se_gaussian_si_step(bg(0.3), 0.0, 0.5, 0.3, 0.01, 2000, 1).unwrap();
        assert_eq!(e.lambda_sq, 0.01);
        let bdd = PriorModel::Bdd(BddPrior::batch_experiment());
        assert!(matches!(
            se_gaussian_si_step(bdd, 0.1, 0.5, 0.3, 0.01, 2000, 1),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn effective_channel_limits() {
        let c = effective_channel(0.3, 0.01, 0.2, 0.2).unwrap();
        assert_relative_eq!(c.mu, 0.5);
        assert_relative_eq!(c.delta_eff, 0.6);
        assert_relative_eq!(c.sigma_eff_sq, 0.005);
        let c = effective_channel(0.3, 0.01, f64::INFINITY, 0.2).unwrap();
        assert_eq!((c.mu, c.delta_eff, c.sigma_eff_sq), (1.0, 0.3, 0.01));
        let c = effective_channel(0.3, 0.01, 1e12, 0.2).unwrap();
        assert_relative_eq!(c.delta_eff, 0.3, max_relative = 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SeConfig { t_max: 5, mc: 3000, tol: 0.0, seed: 77 };
        let a = se_run(bg(0.3), Some(0.01), 0.3, 0.01, cfg).unwrap();
        let b = se_run(bg(0.3), Some(0.01), 0.3, 0.01, cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(se_step(bg(0.3), None, 1.0, 0.3, 0.01, 10, 0).is_err());
    }

    #[test]
    fn bdd_phase_family_bounds() {
        let f = PhaseFamily::Bdd { sigma_s_sq: 1.0, rho: 0.95 };
        assert!(f.prior(0.005).is_err());
        let PriorModel::Bdd(p) = f.prior(0.19).unwrap() else { unreachable!() };
        assert_relative_eq!(p.eps()[2], 0.18, epsilon = 1e-15);
        assert_relative_eq!(p.active_fraction(), 0.19, epsilon = 1e-15);
    }
}
