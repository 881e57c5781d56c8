//! Brute-force posterior means used to validate the closed-form denoisers.
//!
//! Nothing here reuses the denoiser algebra: the BG and GG posteriors are
//! integrated numerically against the prior, with the BG atom at zero kept as
//! a separate exact term, and the BDD posterior is estimated by
//! self-normalised importance sampling from the four-case prior.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{joint_density_log, ln_psi};
use crate::models::{BddPrior, PriorModel};
use crate::quadrature::{integrate, integrate_2d, QuadratureOptions};
use crate::rng::rng_from_seed;

/// Posterior-mean quadrature tolerances. Tighter than the `1e-10` contract
/// so that the ratio of two integrals keeps it.
const POSTERIOR_OPTS: QuadratureOptions = QuadratureOptions {
    abs_tol: 1e-15,
    rel_tol: 1e-13,
    max_intervals: 4000,
};

/// `E[X | X + λU = a, X + σ̂V = b]` for the BG or GG prior, by adaptive
/// quadrature. `sigma_hat_sq = ∞` drops the SI factor (plain MMSE denoiser).
pub fn oracle_posterior_mean_quadrature(
    prior: PriorModel,
    lambda_sq: f64,
    sigma_hat_sq: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    if !(lambda_sq > 0.0 && lambda_sq.is_finite()) || !(sigma_hat_sq > 0.0) {
        return Err(invalid("variances", "oracle needs positive noise variances"));
    }
    let (atom_weight, slab_var) = match prior {
        PriorModel::Bg(p) => (1.0 - p.epsilon(), 1.0),
        PriorModel::Gg(p) => (0.0, p.sigma_x_sq()),
        PriorModel::Bdd(_) => {
            return Err(Error::UnsupportedModel(
                "quadrature oracle covers BG and GG; use the Monte-Carlo oracle for BDD",
            ))
        }
    };
    let slab_weight = 1.0 - atom_weight;
    if slab_weight == 0.0 {
        return Ok(0.0);
    }
    let with_si = sigma_hat_sq.is_finite();
    let log_lik = |x: f64| {
        let mut l = ln_psi(a - x, lambda_sq);
        if with_si {
            l += ln_psi(b - x, sigma_hat_sq);
        }
        l
    };
    let log_cont = |x: f64| slab_weight.ln() + ln_psi(x, slab_var) + log_lik(x);

    let mut sd = lambda_sq.sqrt().max(slab_var.sqrt());
    let mut lo = a.min(0.0);
    let mut hi = a.max(0.0);
    if with_si {
        sd = sd.max(sigma_hat_sq.sqrt());
        lo = lo.min(b);
        hi = hi.max(b);
    }
    lo -= 40.0 * sd;
    hi += 40.0 * sd;

    // Locate the peak of the continuous part on a grid; it anchors the log
    // shift and a breakpoint.
    const GRID: usize = 4000;
    let mut peak_x = 0.0;
    let mut peak = f64::NEG_INFINITY;
    for k in 0..=GRID {
        let x = lo + (hi - lo) * k as f64 / GRID as f64;
        let v = log_cont(x);
        if v > peak {
            peak = v;
            peak_x = x;
        }
    }
    let atom_log = if atom_weight > 0.0 {
        atom_weight.ln() + log_lik(0.0)
    } else {
        f64::NEG_INFINITY
    };
    let shift = peak.max(atom_log);

    // Geometric breakpoints around the peak keep a narrow posterior from
    // slipping between the Kronrod nodes of a wide piece.
    let step = (hi - lo) / GRID as f64;
    let mut breaks: Vec<f64> = Vec::from([0.0, a, peak_x]);
    for k in 0..8 {
        let d = step * (4f64).powi(k);
        breaks.push(peak_x - d);
        breaks.push(peak_x + d);
    }
    if with_si {
        breaks.push(b);
    }
    breaks.sort_by(f64::total_cmp);

    let den_cont = integrate(|x| (log_cont(x) - shift).exp(), lo, hi, &breaks, POSTERIOR_OPTS)?;
    let den = den_cont.value + (atom_log - shift).exp();
    // The mean's error is the numerator's error over `den`; an odd
    // integrand cancelling towards zero cannot meet a purely relative target.
    let num_opts = QuadratureOptions {
        abs_tol: 1e-13 * den,
        ..POSTERIOR_OPTS
    };
    let num = integrate(|x| x * (log_cont(x) - shift).exp(), lo, hi, &breaks, num_opts)?;
    if !(den > 0.0) {
        return Err(Error::Quadrature {
            evaluations: den_cont.evaluations + num.evaluations,
            error_estimate: den_cont.error_estimate,
        });
    }
    Ok(num.value / den)
}

/// Importance-sampling estimate of a posterior mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub ess: f64,
    pub samples: usize,
}

/// `E[X_c | X_c + λU = a, X_p + σ̂V = b]` under the BDD prior, by
/// self-normalised importance sampling with the prior as proposal.
pub fn oracle_posterior_mean_mc(
    prior: BddPrior,
    lambda_sq: f64,
    sigma_hat_sq: f64,
    a: f64,
    b: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(lambda_sq > 0.0) || !(sigma_hat_sq > 0.0) {
        return Err(invalid("variances", "oracle needs positive noise variances"));
    }
    if samples < 1000 {
        return Err(invalid("samples", "need at least 1000 samples"));
    }
    let eps = prior.eps();
    let cum = [eps[0], eps[0] + eps[1], eps[0] + eps[1] + eps[2]];
    let ss = prior.sigma_s_sq().sqrt();
    let sd = prior.sigma_sq().sqrt();
    let rho = prior.rho();
    // Weights are bounded by the densities at zero offset.
    let shift = ln_psi(0.0, lambda_sq) + ln_psi(0.0, sigma_hat_sq);

    let mut rng = rng_from_seed(seed);
    let (mut sw, mut swx, mut sw2, mut sw2x, mut sw2x2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let u: f64 = rng.random();
        let g1: f64 = StandardNormal.sample(&mut rng);
        let g2: f64 = StandardNormal.sample(&mut rng);
        let (xp, xc) = if u < cum[0] {
            (0.0, 0.0)
        } else if u < cum[1] {
            (ss * g1, 0.0)
        } else if u < cum[2] {
            let xp = ss * g1;
            (xp, rho * xp + sd * g2)
        } else {
            (0.0, ss * g2)
        };
        let w = (ln_psi(a - xc, lambda_sq) + ln_psi(b - xp, sigma_hat_sq) - shift).exp();
        sw += w;
        swx += w * xc;
        let w2 = w * w;
        sw2 += w2;
        sw2x += w2 * xc;
        sw2x2 += w2 * xc * xc;
    }
    let ess = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
    if !(ess >= 100.0) {
        return Err(Error::UnreliableEstimate { ess });
    }
    let mean = swx / sw;
    // Delta-method variance of the ratio estimator.
    let var = (sw2x2 - 2.0 * mean * sw2x + mean * mean * sw2).max(0.0) / (sw * sw);
    Ok(McEstimate {
        mean,
        stderr: var.sqrt(),
        ess,
        samples,
    })
}

/// `f(a, b) = ∫ ψ_{σx²}(x) ψ_{σb²}(b − x) ψ_{σa²}(a − ρx) dx` by quadrature
/// over `[−12σx, 12σx]`.
pub fn oracle_joint_density(
    a: f64,
    b: f64,
    rho: f64,
    sigma_x_sq: f64,
    sigma_a_sq: f64,
    sigma_b_sq: f64,
) -> Result<f64> {
    if !(sigma_x_sq > 0.0 && sigma_a_sq > 0.0 && sigma_b_sq > 0.0) {
        return Err(invalid("variances", "must be positive"));
    }
    let half = 12.0 * sigma_x_sq.sqrt();
    let log_f = |x: f64| ln_psi(x, sigma_x_sq) + ln_psi(b - x, sigma_b_sq) + ln_psi(a - rho * x, sigma_a_sq);
    // Scale the integrand by its grid maximum so far-tail densities keep
    // full relative accuracy.
    const GRID: usize = 2000;
    let step = 2.0 * half / GRID as f64;
    let (mut peak_x, mut peak) = (0.0, f64::NEG_INFINITY);
    for k in 0..=GRID {
        let x = -half + step * k as f64;
        let v = log_f(x);
        if v > peak {
            peak = v;
            peak_x = x;
        }
    }
    let mut breaks = Vec::from([0.0, b, peak_x]);
    if rho != 0.0 {
        breaks.push(a / rho);
    }
    for k in 0..6 {
        let d = step * (4f64).powi(k);
        breaks.push(peak_x - d);
        breaks.push(peak_x + d);
    }
    breaks.sort_by(f64::total_cmp);
    let opts = QuadratureOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let r = integrate(|x| (log_f(x) - peak).exp(), -half, half, &breaks, opts)?;
    Ok(r.value * peak.exp())
}

/// Total mass of the closed-form joint density over a box of ±`width`
/// marginal standard deviations in each coordinate.
pub fn joint_density_mass(
    rho: f64,
    sigma_x_sq: f64,
    sigma_a_sq: f64,
    sigma_b_sq: f64,
    width: f64,
) -> Result<f64> {
    joint_density_log(0.0, 0.0, rho, sigma_x_sq, sigma_a_sq, sigma_b_sq)?;
    let sa = (rho * rho * sigma_x_sq + sigma_a_sq).sqrt() * width;
    let sb = (sigma_x_sq + sigma_b_sq).sqrt() * width;
    let opts = QuadratureOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        max_intervals: 2000,
    };
    let r = integrate_2d(
        |a, b| {
            joint_density_log(a, b, rho, sigma_x_sq, sigma_a_sq, sigma_b_sq)
                .map(f64::exp)
                .unwrap_or(f64::NAN)
        },
        (-sa, sa),
        (-sb, sb),
        opts,
    )?;
    Ok(r.value)
}
