//! Scalar Gaussian identities.
//!
//! Densities are exposed in log form. `ψ_v(x)` below denotes the zero-mean
//! Gaussian density with variance `v` evaluated at `x`; `ψ̃_{μ,v}` its
//! mean-shifted version.
//!
//! The joint-density and conditional-mean helpers describe two noisy views of
//! a Gaussian variable `X ~ N(0, σ_x²)`:
//!
//! ```text
//! A = ρ X + N(0, σ_a²),    B = X + N(0, σ_b²).
//! ```

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDensityParams {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianDensityParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::Domain("variance must be non-negative"));
        }
        Ok(Self { mean, variance })
    }
}

/// `ln ψ_var(x)` with no argument checks; hot path for the denoisers.
#[inline]
pub(crate) fn ln_psi(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + x * x / var)
}

/// Log-density of `N(mean, variance)` at `x`.
pub fn log_gauss_pdf(x: f64, params: GaussianDensityParams) -> Result<f64> {
    if !(params.variance > 0.0) {
        return Err(Error::Domain("log_gauss_pdf needs a positive variance"));
    }
    Ok(ln_psi(x - params.mean, params.variance))
}

/// Product of two Gaussian densities in `x`:
/// `ψ̃_{μ₁,σ₁²}(x) ψ̃_{μ₂,σ₂²}(x) = ψ̃_{combined}(x) · exp(log_scale)`,
/// with `log_scale = ln ψ̃_{μ₁−μ₂, σ₁²+σ₂²}(0)`.
pub fn gauss_product(
    p1: GaussianDensityParams,
    p2: GaussianDensityParams,
) -> Result<(GaussianDensityParams, f64)> {
    if !(p1.variance > 0.0 && p2.variance > 0.0) {
        return Err(Error::Domain("gauss_product needs positive variances"));
    }
    let total = p1.variance + p2.variance;
    let combined = GaussianDensityParams {
        mean: (p1.mean * p2.variance + p2.mean * p1.variance) / total,
        variance: p1.variance * p2.variance / total,
    };
    let log_scale = ln_psi(p1.mean - p2.mean, total);
    Ok((combined, log_scale))
}

/// Log of the joint density `f(a, b)`:
///
/// ```text
/// f(a,b) = (1/|ρ|) ψ_{σx²+σb²}(b) ψ_{σx²σb²/(σx²+σb²) + σa²/ρ²}(σx² b/(σx²+σb²) − a/ρ)
/// ```
pub fn joint_density_log(
    a: f64,
    b: f64,
    rho: f64,
    sigma_x_sq: f64,
    sigma_a_sq: f64,
    sigma_b_sq: f64,
) -> Result<f64> {
    if rho == 0.0 || !rho.is_finite() {
        return Err(Error::Domain("joint density needs a finite nonzero rho"));
    }
    if !(sigma_x_sq > 0.0 && sigma_a_sq > 0.0 && sigma_b_sq > 0.0) {
        return Err(Error::Domain("joint density needs positive variances"));
    }
    Ok(joint_density_log_unchecked(
        a, b, rho, sigma_x_sq, sigma_a_sq, sigma_b_sq,
    ))
}

#[inline]
pub(crate) fn joint_density_log_unchecked(
    a: f64,
    b: f64,
    rho: f64,
    sigma_x_sq: f64,
    sigma_a_sq: f64,
    sigma_b_sq: f64,
) -> f64 {
    let sb = sigma_x_sq + sigma_b_sq;
    let shrink = sigma_x_sq / sb;
    let v = sigma_x_sq * sigma_b_sq / sb + sigma_a_sq / (rho * rho);
    -rho.abs().ln() + ln_psi(b, sb) + ln_psi(shrink * b - a / rho, v)
}

/// `E[X | A = a, B = b]`:
///
/// ```text
/// (ρ σx² σb² a + σx² σa² b) / (σx² (σa² + ρ² σb²) + σa² σb²)
/// ```
pub fn joint_cond_mean(
    a: f64,
    b: f64,
    rho: f64,
    sigma_x_sq: f64,
    sigma_a_sq: f64,
    sigma_b_sq: f64,
) -> Result<f64> {
    let den = sigma_x_sq * (sigma_a_sq + rho * rho * sigma_b_sq) + sigma_a_sq * sigma_b_sq;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Domain("conditional mean has a degenerate denominator"));
    }
    Ok((rho * sigma_x_sq * sigma_b_sq * a + sigma_x_sq * sigma_a_sq * b) / den)
}

/// Matched-filter combination of pseudo-data `a` (noise `λ²`) and SI `b`
/// (noise `σ̂²`): `(a σ̂² + b λ²) / (σ̂² + λ²)`.
pub fn matched_filter_mu(a: f64, b: f64, lambda_sq: f64, sigma_hat_sq: f64) -> Result<f64> {
    let total = lambda_sq + sigma_hat_sq;
    if !(total > 0.0) {
        return Err(Error::Domain("matched filter needs lambda^2 + sigma_hat^2 > 0"));
    }
    Ok((a * sigma_hat_sq + b * lambda_sq) / total)
}

/// Noise variance left after matched filtering: `λ² σ̂² / (σ̂² + λ²)`.
pub fn matched_filter_var(lambda_sq: f64, sigma_hat_sq: f64) -> Result<f64> {
    let total = lambda_sq + sigma_hat_sq;
    if !(total > 0.0) {
        return Err(Error::Domain("matched filter needs lambda^2 + sigma_hat^2 > 0"));
    }
    if sigma_hat_sq.is_infinite() {
        return Ok(lambda_sq);
    }
    if lambda_sq.is_infinite() {
        return Ok(sigma_hat_sq);
    }
    Ok(lambda_sq * sigma_hat_sq / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gp(mean: f64, variance: f64) -> GaussianDensityParams {
        GaussianDensityParams::new(mean, variance).unwrap()
    }

    #[test]
    fn log_pdf_values() {
        let v = log_gauss_pdf(0.0, gp(0.0, 1.0)).unwrap();
        assert_relative_eq!(v, -0.918_938_533_204_672_7, epsilon = 1e-15);
        for var in [0.01, 1.0, 7.5] {
            let at_mean = log_gauss_pdf(2.5, gp(2.5, var)).unwrap();
            assert_relative_eq!(at_mean, -0.5 * (2.0 * core::f64::consts::PI * var).ln(), epsilon = 1e-14);
        }
        let far = log_gauss_pdf(50.0, gp(0.0, 1.0)).unwrap();
        assert_relative_eq!(far, -1250.0 - 0.5 * LN_2PI, epsilon = 1e-12);
        assert!(log_gauss_pdf(0.0, gp(0.0, 0.0)).is_err());
    }

    #[test]
    fn product_symmetric_case() {
        let (c, s) = gauss_product(gp(0.0, 1.0), gp(0.0, 1.0)).unwrap();
        assert_eq!(c.mean, 0.0);
        assert_eq!(c.variance, 0.5);
        assert_relative_eq!(s, ln_psi(0.0, 2.0), epsilon = 1e-15);
    }

    #[test]
    fn product_hand_values() {
        let (c, _) = gauss_product(gp(1.0, 1.0), gp(-1.0, 3.0)).unwrap();
        assert_relative_eq!(c.mean, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.variance, 0.75, epsilon = 1e-15);
        assert!(gauss_product(gp(0.0, 0.0), gp(0.0, 1.0)).is_err());
    }

    #[test]
    fn joint_density_rejects_zero_rho() {
        assert!(joint_density_log(0.0, 0.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(joint_density_log(0.0, 0.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn joint_density_symmetric_under_swap() {
        for &(a, b) in &[(0.3, -1.2), (2.0, 0.5), (-3.0, 1.0)] {
            let f = joint_density_log(a, b, 1.0, 1.3, 0.7, 0.7).unwrap();
            let g = joint_density_log(b, a, 1.0, 1.3, 0.7, 0.7).unwrap();
            assert_relative_eq!(f, g, epsilon = 1e-12);
        }
    }

    #[test]
    fn joint_density_origin_value() {
        // rho = 1, unit variances: psi_2(0) psi_1.5(0)
        let f = joint_density_log(0.0, 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(f, ln_psi(0.0, 2.0) + ln_psi(0.0, 1.5), epsilon = 1e-14);
    }

    #[test]
    fn cond_mean_values() {
        assert_eq!(joint_cond_mean(0.0, 0.0, 0.7, 1.0, 2.0, 3.0).unwrap(), 0.0);
        assert_relative_eq!(joint_cond_mean(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let wiener = 2.0 * 0.8 / (2.0 + 0.5);
        let far = joint_cond_mean(3.0, 0.8, 0.9, 2.0, 1e12, 0.5).unwrap();
        assert_relative_eq!(far, wiener, epsilon = 1e-9);
        assert!(joint_cond_mean(1.0, 1.0, 1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn matched_filter_values() {
        assert_relative_eq!(matched_filter_mu(1.0, 3.0, 2.0, 2.0).unwrap(), 2.0);
        assert_eq!(matched_filter_mu(1.0, 3.0, 2.0, 0.0).unwrap(), 3.0);
        assert_relative_eq!(matched_filter_mu(2.0, 0.0, 1.0, 3.0).unwrap(), 1.5);
        assert_relative_eq!(matched_filter_var(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(matched_filter_var(1.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(matched_filter_var(4.0, 1.0).unwrap(), 0.8);
        assert_eq!(matched_filter_var(0.3, f64::INFINITY).unwrap(), 0.3);
        assert!(matched_filter_var(0.0, 0.0).is_err());
        assert!(matched_filter_mu(1.0, 1.0, 0.0, 0.0).is_err());
    }
}
