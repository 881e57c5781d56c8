//! Prior models and signal / side-information generators.
//!
//! Three priors are supported:
//!
//! * Bernoulli-Gaussian (BG): zero with probability `1 − ε`, standard
//!   Gaussian otherwise.
//! * Birth-death-drift (BDD): a four-case per-entry evolution between the
//!   previous batch `x_p` and the current batch `x_c`.
//! * Gaussian-Gaussian (GG): `X ~ N(0, σ_X²)`.
//!
//! For BG and GG the side information is `x̃ = x + N(0, σ̂²)`; for BDD it is a
//! noisy view of the previous batch, `x̃ = x_p + N(0, σ̂²)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgPrior {
    epsilon: f64,
}

impl BgPrior {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(invalid("epsilon", "must lie in [0, 1]"));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `E[X²] = ε`.
    pub fn second_moment(&self) -> f64 {
        self.epsilon
    }
}

/// Birth-death-drift prior.
///
/// Case 1: zero stays zero. Case 2 (death): `x_p ~ N(0, σ_s²)`, `x_c = 0`.
/// Case 3 (drift): `x_c = ρ x_p + N(0, σ²)`. Case 4 (birth): `x_p = 0`,
/// `x_c ~ N(0, σ_s²)`. The drift variance is tied to the others through
/// `ρ² σ_s² + σ² = σ_s²`, so it is derived rather than stored freely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BddPrior {
    eps: [f64; 4],
    sigma_s_sq: f64,
    rho: f64,
    sigma_sq: f64,
}

impl BddPrior {
    /// `rho` may equal 1 (no drift noise), which is the Bernoulli-Gaussian
    /// reduction.
    pub fn new(eps: [f64; 4], sigma_s_sq: f64, rho: f64) -> Result<Self> {
        if eps.iter().any(|&e| !(e >= 0.0)) {
            return Err(invalid("eps", "case probabilities must be non-negative"));
        }
        if (eps.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return Err(invalid("eps", "case probabilities must sum to 1"));
        }
        if !(sigma_s_sq > 0.0 && sigma_s_sq.is_finite()) {
            return Err(invalid("sigma_s_sq", "must be positive and finite"));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(invalid("rho", "must lie in (0, 1]"));
        }
        let sigma_sq = (1.0 - rho * rho) * sigma_s_sq;
        Ok(Self {
            eps,
            sigma_s_sq,
            rho,
            sigma_sq,
        })
    }

    /// Like [`BddPrior::new`], but also checks a caller-supplied drift
    /// variance against the steady-state constraint.
    pub fn with_drift_variance(
        eps: [f64; 4],
        sigma_s_sq: f64,
        rho: f64,
        sigma_sq: f64,
    ) -> Result<Self> {
        let prior = Self::new(eps, sigma_s_sq, rho)?;
        if (rho * rho * sigma_s_sq + sigma_sq - sigma_s_sq).abs() > SUM_TOL {
            return Err(invalid(
                "sigma_sq",
                "violates rho^2 sigma_s^2 + sigma^2 = sigma_s^2",
            ));
        }
        Ok(prior)
    }

    /// Parameters used for the i.i.d. batch experiments:
    /// `ε = (0.80, 0.01, 0.18, 0.01)`, `σ_s² = 1`, `ρ = 0.95`.
    pub fn batch_experiment() -> Self {
        Self::new([0.80, 0.01, 0.18, 0.01], 1.0, 0.95).expect("valid constants")
    }

    /// Parameters used for the Toeplitz channel experiment:
    /// `ε = (0.78, 0.01, 0.20, 0.01)`, `σ_s² = 1`, `ρ = 0.95`.
    pub fn channel_experiment() -> Self {
        Self::new([0.78, 0.01, 0.20, 0.01], 1.0, 0.95).expect("valid constants")
    }

    /// Bernoulli-Gaussian as a special case: `ε₂ = ε₄ = 0`, `ε₃ = ε`,
    /// `σ = 0`, `σ_s² = 1`.
    pub fn from_bg(bg: BgPrior) -> Self {
        let e = bg.epsilon();
        Self {
            eps: [1.0 - e, 0.0, e, 0.0],
            sigma_s_sq: 1.0,
            rho: 1.0,
            sigma_sq: 0.0,
        }
    }

    pub fn eps(&self) -> [f64; 4] {
        self.eps
    }

    pub fn sigma_s_sq(&self) -> f64 {
        self.sigma_s_sq
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    /// Probability that an entry of the current batch is nonzero, `ε₃ + ε₄`.
    pub fn active_fraction(&self) -> f64 {
        self.eps[2] + self.eps[3]
    }

    /// `E[X_c²] = (ε₃ + ε₄) σ_s²`.
    pub fn second_moment(&self) -> f64 {
        self.active_fraction() * self.sigma_s_sq
    }

    /// Marginal law of a single batch, which is Bernoulli-Gaussian with slab
    /// variance `σ_s²`.
    pub fn marginal(&self) -> SpikeSlab {
        SpikeSlab {
            epsilon: self.active_fraction(),
            slab_var: self.sigma_s_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgPrior {
    sigma_x_sq: f64,
}

impl GgPrior {
    pub fn new(sigma_x_sq: f64) -> Result<Self> {
        if !(sigma_x_sq > 0.0 && sigma_x_sq.is_finite()) {
            return Err(invalid("sigma_x_sq", "must be positive and finite"));
        }
        Ok(Self { sigma_x_sq })
    }

    pub fn sigma_x_sq(&self) -> f64 {
        self.sigma_x_sq
    }
}

/// Spike-and-slab marginal: zero w.p. `1 − ε`, `N(0, slab_var)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeSlab {
    pub epsilon: f64,
    pub slab_var: f64,
}

/// Additive Gaussian noise on the side information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiChannel {
    sigma_hat_sq: f64,
}

impl SiChannel {
    /// `sigma_hat_sq = 0` is exact side information.
    pub fn new(sigma_hat_sq: f64) -> Result<Self> {
        if !(sigma_hat_sq >= 0.0) || sigma_hat_sq.is_infinite() {
            return Err(invalid("sigma_hat_sq", "must be non-negative and finite"));
        }
        Ok(Self { sigma_hat_sq })
    }

    pub fn sigma_hat_sq(&self) -> f64 {
        self.sigma_hat_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorModel {
    Bg(BgPrior),
    Bdd(BddPrior),
    Gg(GgPrior),
}

impl PriorModel {
    pub fn name(&self) -> &'static str {
        match self {
            PriorModel::Bg(_) => "BG",
            PriorModel::Bdd(_) => "BDD",
            PriorModel::Gg(_) => "GG",
        }
    }

    /// `E[X²]` of the signal being recovered.
    pub fn second_moment(&self) -> f64 {
        match self {
            PriorModel::Bg(p) => p.second_moment(),
            PriorModel::Bdd(p) => p.second_moment(),
            PriorModel::Gg(p) => p.sigma_x_sq(),
        }
    }

    /// True when the side information is the signal itself plus Gaussian
    /// noise (BG and GG), so the matched-filter reduction applies.
    pub fn has_gaussian_si(&self) -> bool {
        !matches!(self, PriorModel::Bdd(_))
    }
}

/// A signal together with its side information.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPair {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    /// Previous-batch signal (BDD only).
    pub x_prev: Option<Vec<f64>>,
    /// Per-entry case index 1–4 (BDD only).
    pub case_labels: Option<Vec<u8>>,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws `n` i.i.d. entries from the Bernoulli-Gaussian prior.
pub fn sample_bg(prior: BgPrior, n: usize, seed: u64) -> Vec<f64> {
    sample_spike_slab(
        SpikeSlab {
            epsilon: prior.epsilon(),
            slab_var: 1.0,
        },
        n,
        seed,
    )
}

pub fn sample_spike_slab(law: SpikeSlab, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let sd = law.slab_var.sqrt();
    (0..n)
        .map(|_| {
            // Both draws are always taken so the stream layout does not
            // depend on epsilon.
            let u: f64 = rng.random();
            let g = gaussian(&mut rng);
            if u < law.epsilon {
                sd * g
            } else {
                0.0
            }
        })
        .collect()
}

/// First batch of a BDD sequence, drawn from the stationary marginal
/// (nonzero w.p. `ε₃ + ε₄`, `N(0, σ_s²)`).
pub fn sample_bdd_initial(prior: BddPrior, n: usize, seed: u64) -> Vec<f64> {
    sample_spike_slab(prior.marginal(), n, seed)
}

/// Evolves one BDD batch.
///
/// The case of each entry is drawn given the support of `x_prev`: a nonzero
/// entry dies (case 2) or drifts (case 3) with probabilities proportional to
/// `ε₂, ε₃`; a zero entry stays zero (case 1) or is born (case 4) with
/// probabilities proportional to `ε₁, ε₄`. When the chain is stationary
/// (`ε₂ = ε₄`, nonzero fraction `ε₃ + ε₄`) each case then occurs with
/// probability `εⱼ`. If a support class has zero total probability the
/// entry falls back to death (nonzero input) or birth (zero input).
pub fn sample_bdd_step(prior: BddPrior, x_prev: &[f64], seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = rng_from_seed(seed);
    let [e1, e2, e3, e4] = prior.eps;
    let sigma = prior.sigma_sq.sqrt();
    let sigma_s = prior.sigma_s_sq.sqrt();
    let mut x = vec![0.0; x_prev.len()];
    let mut cases = vec![0u8; x_prev.len()];
    for ((xc, case), &xp) in x.iter_mut().zip(cases.iter_mut()).zip(x_prev) {
        let u: f64 = rng.random();
        let g = gaussian(&mut rng);
        if xp != 0.0 {
            let mass = e2 + e3;
            if mass > 0.0 && u * mass < e3 {
                *case = 3;
                *xc = prior.rho * xp + sigma * g;
            } else {
                *case = 2;
            }
        } else {
            let mass = e1 + e4;
            if mass > 0.0 && u * mass < e1 {
                *case = 1;
            } else {
                *case = 4;
                *xc = sigma_s * g;
            }
        }
    }
    (x, cases)
}

/// Adds i.i.d. `N(0, σ̂²)` noise to `x_ref`.
pub fn make_si(x_ref: &[f64], si: SiChannel, seed: u64) -> Vec<f64> {
    if si.sigma_hat_sq == 0.0 {
        return x_ref.to_vec();
    }
    let mut rng = rng_from_seed(seed);
    let sd = si.sigma_hat_sq.sqrt();
    x_ref.iter().map(|&x| x + sd * gaussian(&mut rng)).collect()
}

/// Builds a BDD [`SignalPair`] from a previous batch: evolves `x_prev` and
/// attaches SI `x_prev + N(0, σ̂²)`.
pub fn bdd_pair(
    prior: BddPrior,
    x_prev: Vec<f64>,
    si: SiChannel,
    signal_seed: u64,
    si_seed: u64,
) -> SignalPair {
    let (x, cases) = sample_bdd_step(prior, &x_prev, signal_seed);
    let x_tilde = make_si(&x_prev, si, si_seed);
    SignalPair {
        x,
        x_tilde,
        x_prev: Some(x_prev),
        case_labels: Some(cases),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bg_rejects_out_of_range() {
        assert!(BgPrior::new(-0.1).is_err());
        assert!(BgPrior::new(1.1).is_err());
        assert!(BgPrior::new(f64::NAN).is_err());
        assert!(BgPrior::new(0.0).is_ok());
    }

    #[test]
    fn bdd_validation() {
        assert!(BddPrior::new([0.5, 0.1, 0.3, 0.1], 1.0, 0.95).is_ok());
        assert!(BddPrior::new([0.5, 0.1, 0.3, 0.2], 1.0, 0.95).is_err());
        assert!(BddPrior::new([1.1, -0.1, 0.0, 0.0], 1.0, 0.95).is_err());
        assert!(BddPrior::new([0.5, 0.1, 0.3, 0.1], 0.0, 0.95).is_err());
        assert!(BddPrior::new([0.5, 0.1, 0.3, 0.1], 1.0, 0.0).is_err());
        assert!(BddPrior::new([0.5, 0.1, 0.3, 0.1], 1.0, 1.5).is_err());
        let p = BddPrior::new([0.5, 0.1, 0.3, 0.1], 2.0, 0.95).unwrap();
        assert!((p.sigma_sq() - (1.0 - 0.95 * 0.95) * 2.0).abs() < 1e-15);
        assert!(BddPrior::with_drift_variance([0.5, 0.1, 0.3, 0.1], 1.0, 0.95, 0.0975).is_ok());
        assert!(BddPrior::with_drift_variance([0.5, 0.1, 0.3, 0.1], 1.0, 0.95, 0.2).is_err());
    }

    #[test]
    fn drift_variance_hand_value() {
        let p = BddPrior::new([0.0, 0.0, 1.0, 0.0], 1.0, 0.95).unwrap();
        assert!((p.sigma_sq() - 0.0975).abs() < 1e-15);
    }

    #[test]
    fn zero_epsilon_gives_zero_vector() {
        let x = sample_bg(BgPrior::new(0.0).unwrap(), 5, 1);
        assert_eq!(x, vec![0.0; 5]);
    }

    #[test]
    fn all_dead_gives_zero_vector() {
        let p = BddPrior::new([1.0, 0.0, 0.0, 0.0], 1.0, 0.95).unwrap();
        let (x, cases) = sample_bdd_step(p, &[1.0, 0.0, -2.0, 0.5], 9);
        assert_eq!(x, vec![0.0; 4]);
        assert!(cases.iter().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn noiseless_si_is_exact_copy() {
        let x = [1.0, -2.0, 0.0];
        assert_eq!(make_si(&x, SiChannel::new(0.0).unwrap(), 3), x.to_vec());
    }

    #[test]
    fn case_label_invariants() {
        let p = BddPrior::batch_experiment();
        let x0 = sample_bdd_initial(p, 5000, 1);
        let (x1, cases) = sample_bdd_step(p, &x0, 2);
        for ((&c, &xc), &xp) in cases.iter().zip(&x1).zip(&x0) {
            assert!((1..=4).contains(&c));
            if c == 1 || c == 2 {
                assert_eq!(xc, 0.0);
            }
            if c == 1 || c == 4 {
                assert_eq!(xp, 0.0);
            }
        }
    }

    #[test]
    fn reproducible() {
        let p = BgPrior::new(0.3).unwrap();
        assert_eq!(sample_bg(p, 100, 5), sample_bg(p, 100, 5));
        assert_ne!(sample_bg(p, 100, 5), sample_bg(p, 100, 6));
    }
}
