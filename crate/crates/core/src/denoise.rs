//! Conditional MMSE denoisers `η(a, b) = E[X | X + λU = a, X̃ = b]` and their
//! derivatives in the pseudo-data argument `a`.
//!
//! Every nonlinear denoiser here is a posterior mean over a finite Gaussian
//! mixture. Each mixture component `k` contributes a log joint density
//! `ℓ_k(a, b)` that is a sum of Gaussian log-kernels of linear forms in
//! `(a, b)`, and a conditional mean `m_k(a, b)` that is linear. Then
//!
//! ```text
//! η  = Σ π_k m_k,                       π_k = softmax(ℓ)_k
//! η' = Σ π_k [∂m_k + m_k (∂ℓ_k − Σ_j π_j ∂ℓ_j)]
//! ```
//!
//! Weights are normalised in the log domain, so arguments far in the tails
//! (|a| of several hundred noise standard deviations) stay finite.
//!
//! For a given `λ²` the component constants are fixed, so callers that
//! evaluate many entries first [`Denoiser::prepare`] and then call
//! [`Prepared::eval`] per entry.

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use crate::error::{invalid, Result};
use crate::models::{BddPrior, BgPrior, GgPrior, PriorModel, SpikeSlab};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Below this SI variance the side information is treated as exact.
pub const EXACT_SI_THRESHOLD: f64 = 1e-14;

/// Gaussian log-kernel `−½ (p a + q b)² / v`.
#[derive(Debug, Clone, Copy, Default)]
struct Term {
    p: f64,
    q: f64,
    inv_v: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Component {
    /// `ln ε_k − ½ Σ ln(2π v)`.
    log_const: f64,
    terms: [Term; 2],
    n_terms: usize,
    /// Conditional mean `ma a + mb b`.
    ma: f64,
    mb: f64,
}

impl Component {
    fn new(log_weight: f64, ma: f64, mb: f64) -> Self {
        Self {
            log_const: log_weight,
            ma,
            mb,
            ..Self::default()
        }
    }

    /// Multiplies the component by `ψ_v(p a + q b)`.
    fn with_kernel(mut self, p: f64, q: f64, v: f64) -> Self {
        self.log_const -= 0.5 * (LN_2PI + v.ln());
        self.terms[self.n_terms] = Term { p, q, inv_v: 1.0 / v };
        self.n_terms += 1;
        self
    }

    #[inline]
    fn log_density(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lw = self.log_const;
        let mut dlw = 0.0;
        for t in &self.terms[..self.n_terms] {
            let s = t.p * a + t.q * b;
            lw -= 0.5 * s * s * t.inv_v;
            dlw -= t.p * s * t.inv_v;
        }
        (lw, dlw)
    }
}

#[derive(Debug, Clone, Copy)]
struct Mixture {
    comps: [Component; 4],
    len: usize,
}

impl Mixture {
    fn new() -> Self {
        Self {
            comps: [Component::default(); 4],
            len: 0,
        }
    }

    /// Components with zero prior weight are dropped.
    fn push(&mut self, c: Component) {
        if c.log_const > f64::NEG_INFINITY {
            self.comps[self.len] = c;
            self.len += 1;
        }
    }

    #[inline]
    fn eval(&self, a: f64, b: f64) -> (f64, f64) {
        let comps = &self.comps[..self.len];
        let mut lw = [0.0f64; 4];
        let mut dlw = [0.0f64; 4];
        let mut max = f64::NEG_INFINITY;
        for (k, c) in comps.iter().enumerate() {
            let (l, d) = c.log_density(a, b);
            lw[k] = l;
            dlw[k] = d;
            if l > max {
                max = l;
            }
        }
        if !(max > f64::NEG_INFINITY) {
            return (0.0, 0.0);
        }
        let mut total = 0.0;
        let mut w = [0.0f64; 4];
        for k in 0..comps.len() {
            w[k] = (lw[k] - max).exp();
            total += w[k];
        }
        let mut eta = 0.0;
        let mut dl_bar = 0.0;
        for (k, c) in comps.iter().enumerate() {
            let pi = w[k] / total;
            eta += pi * (c.ma * a + c.mb * b);
            dl_bar += pi * dlw[k];
        }
        let mut deta = 0.0;
        for (k, c) in comps.iter().enumerate() {
            let pi = w[k] / total;
            let m = c.ma * a + c.mb * b;
            deta += pi * (c.ma + m * (dlw[k] - dl_bar));
        }
        (eta, deta)
    }
}

/// A denoiser specialised to one noise level.
#[derive(Debug, Clone, Copy)]
pub struct Prepared {
    kind: PreparedKind,
}

// Built once per iteration, so the size spread between variants is harmless.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, Copy)]
enum PreparedKind {
    /// Noiseless pseudo-data: `η = a`.
    Identity,
    /// Exact SI for BG / GG: `η = b`.
    CopySi,
    Linear { ma: f64, mb: f64 },
    Mixture(Mixture),
    /// Exact SI for BDD: the mixture depends on whether `b` is zero.
    BddExactSi { zero: Mixture, nonzero: Mixture },
}

impl Prepared {
    /// Returns `(η(a, b), ∂η/∂a)`.
    #[inline]
    pub fn eval(&self, a: f64, b: f64) -> (f64, f64) {
        match &self.kind {
            PreparedKind::Identity => (a, 1.0),
            PreparedKind::CopySi => (b, 0.0),
            PreparedKind::Linear { ma, mb } => (ma * a + mb * b, *ma),
            PreparedKind::Mixture(m) => m.eval(a, b),
            PreparedKind::BddExactSi { zero, nonzero } => {
                if b == 0.0 {
                    zero.eval(a, b)
                } else {
                    nonzero.eval(a, b)
                }
            }
        }
    }

    #[inline]
    pub fn eta(&self, a: f64, b: f64) -> f64 {
        self.eval(a, b).0
    }
}

/// Which denoiser AMP uses: the conditional one (with SI of variance
/// `sigma_hat_sq`) or the plain MMSE denoiser of the signal marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Denoiser {
    WithSi { prior: PriorModel, sigma_hat_sq: f64 },
    NoSi(PriorModel),
}

impl Denoiser {
    pub fn with_si(prior: PriorModel, sigma_hat_sq: f64) -> Result<Self> {
        if !(sigma_hat_sq >= 0.0) {
            return Err(invalid("sigma_hat_sq", "must be non-negative"));
        }
        Ok(Denoiser::WithSi {
            prior,
            sigma_hat_sq,
        })
    }

    pub fn prior(&self) -> PriorModel {
        match self {
            Denoiser::WithSi { prior, .. } | Denoiser::NoSi(prior) => *prior,
        }
    }

    pub fn uses_si(&self) -> bool {
        matches!(self, Denoiser::WithSi { .. })
    }

    /// Specialises the denoiser to pseudo-data noise `λ²`.
    pub fn prepare(&self, lambda_sq: f64) -> Prepared {
        if !(lambda_sq > 0.0) {
            return Prepared {
                kind: PreparedKind::Identity,
            };
        }
        let kind = match *self {
            Denoiser::WithSi {
                prior,
                sigma_hat_sq,
            } => match prior {
                PriorModel::Bg(p) => bg_si(p, lambda_sq, sigma_hat_sq),
                PriorModel::Bdd(p) => bdd_si(p, lambda_sq, sigma_hat_sq),
                PriorModel::Gg(p) => gg_si(p, lambda_sq, sigma_hat_sq),
            },
            Denoiser::NoSi(prior) => match prior {
                PriorModel::Bg(p) => spike_slab(
                    SpikeSlab {
                        epsilon: p.epsilon(),
                        slab_var: 1.0,
                    },
                    lambda_sq,
                ),
                PriorModel::Bdd(p) => spike_slab(p.marginal(), lambda_sq),
                PriorModel::Gg(p) => {
                    let s = p.sigma_x_sq();
                    PreparedKind::Linear {
                        ma: s / (s + lambda_sq),
                        mb: 0.0,
                    }
                }
            },
        };
        Prepared { kind }
    }
}

fn ln_weight(eps: f64) -> f64 {
    if eps > 0.0 {
        eps.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn bg_si(p: BgPrior, lambda_sq: f64, sigma_hat_sq: f64) -> PreparedKind {
    if sigma_hat_sq < EXACT_SI_THRESHOLD {
        return PreparedKind::CopySi;
    }
    let eps = p.epsilon();
    let (l, s) = (lambda_sq, sigma_hat_sq);
    let mut mix = Mixture::new();
    // X = 0: a and b are independent noise.
    mix.push(
        Component::new(ln_weight(1.0 - eps), 0.0, 0.0)
            .with_kernel(1.0, 0.0, l)
            .with_kernel(0.0, 1.0, s),
    );
    // X ≠ 0: joint density of two noisy views of a standard Gaussian.
    let den = s + l + s * l;
    mix.push(
        Component::new(ln_weight(eps), s / den, l / den)
            .with_kernel(0.0, 1.0, 1.0 + s)
            .with_kernel(-1.0, 1.0 / (1.0 + s), s / (1.0 + s) + l),
    );
    PreparedKind::Mixture(mix)
}

fn bdd_si(p: BddPrior, lambda_sq: f64, sigma_hat_sq: f64) -> PreparedKind {
    let [e1, e2, e3, e4] = p.eps();
    let (ss, rho, drift) = (p.sigma_s_sq(), p.rho(), p.sigma_sq());
    let l = lambda_sq;
    if sigma_hat_sq < EXACT_SI_THRESHOLD {
        // x_p = b exactly.
        let mut zero = Mixture::new();
        zero.push(Component::new(ln_weight(e1), 0.0, 0.0).with_kernel(1.0, 0.0, l));
        zero.push(Component::new(ln_weight(e4), ss / (ss + l), 0.0).with_kernel(1.0, 0.0, ss + l));
        let mut nonzero = Mixture::new();
        nonzero.push(Component::new(ln_weight(e2), 0.0, 0.0).with_kernel(1.0, 0.0, l));
        let v = drift + l;
        nonzero.push(
            Component::new(ln_weight(e3), drift / v, rho * l / v).with_kernel(1.0, -rho, v),
        );
        return PreparedKind::BddExactSi { zero, nonzero };
    }
    let s = sigma_hat_sq;
    let mut mix = Mixture::new();
    // Case 1: both zero.
    mix.push(
        Component::new(ln_weight(e1), 0.0, 0.0)
            .with_kernel(1.0, 0.0, l)
            .with_kernel(0.0, 1.0, s),
    );
    // Case 2: death, b carries x_p, a is noise.
    mix.push(
        Component::new(ln_weight(e2), 0.0, 0.0)
            .with_kernel(1.0, 0.0, l)
            .with_kernel(0.0, 1.0, s + ss),
    );
    // Case 3: drift, a and b dependent through x_p.
    let den3 = ss * (drift + l + s) + l * s;
    let centre = rho * ss / (s + ss);
    let v3 = rho * rho * ss * s / (ss + s) + drift + l;
    mix.push(
        Component::new(ln_weight(e3), ss * (drift + s) / den3, rho * ss * l / den3)
            .with_kernel(0.0, 1.0, s + ss)
            .with_kernel(-1.0, centre, v3),
    );
    // Case 4: birth, Wiener filter on a.
    mix.push(
        Component::new(ln_weight(e4), ss / (ss + l), 0.0)
            .with_kernel(1.0, 0.0, ss + l)
            .with_kernel(0.0, 1.0, s),
    );
    PreparedKind::Mixture(mix)
}

fn gg_si(p: GgPrior, lambda_sq: f64, sigma_hat_sq: f64) -> PreparedKind {
    if sigma_hat_sq < EXACT_SI_THRESHOLD {
        return PreparedKind::CopySi;
    }
    let (sx, l, s) = (p.sigma_x_sq(), lambda_sq, sigma_hat_sq);
    let den = sx * (s + l) + l * s;
    PreparedKind::Linear {
        ma: sx * s / den,
        mb: sx * l / den,
    }
}

fn spike_slab(law: SpikeSlab, lambda_sq: f64) -> PreparedKind {
    let (v, l) = (law.slab_var, lambda_sq);
    let mut mix = Mixture::new();
    mix.push(Component::new(ln_weight(1.0 - law.epsilon), 0.0, 0.0).with_kernel(1.0, 0.0, l));
    mix.push(Component::new(ln_weight(law.epsilon), v / (v + l), 0.0).with_kernel(1.0, 0.0, v + l));
    PreparedKind::Mixture(mix)
}

/// Prior plus the two noise levels seen by a conditional denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserContext {
    pub prior: PriorModel,
    pub lambda_sq: f64,
    pub sigma_hat_sq: f64,
}

impl DenoiserContext {
    pub fn new(prior: PriorModel, lambda_sq: f64, sigma_hat_sq: f64) -> Result<Self> {
        if !(lambda_sq >= 0.0) {
            return Err(invalid("lambda_sq", "must be non-negative"));
        }
        if !(sigma_hat_sq >= 0.0) {
            return Err(invalid("sigma_hat_sq", "must be non-negative"));
        }
        Ok(Self {
            prior,
            lambda_sq,
            sigma_hat_sq,
        })
    }

    pub fn prepare(&self) -> Prepared {
        Denoiser::WithSi {
            prior: self.prior,
            sigma_hat_sq: self.sigma_hat_sq,
        }
        .prepare(self.lambda_sq)
    }

    pub fn eta(&self, a: f64, b: f64) -> f64 {
        self.prepare().eval(a, b).0
    }

    /// `∂η/∂a`.
    pub fn eta_prime(&self, a: f64, b: f64) -> f64 {
        self.prepare().eval(a, b).1
    }
}

/// Bernoulli-Gaussian conditional denoiser.
pub fn eta_bg(prior: BgPrior, lambda_sq: f64, sigma_hat_sq: f64, a: f64, b: f64) -> f64 {
    Denoiser::WithSi {
        prior: PriorModel::Bg(prior),
        sigma_hat_sq,
    }
    .prepare(lambda_sq)
    .eta(a, b)
}

/// Birth-death-drift conditional denoiser.
pub fn eta_bdd(prior: BddPrior, lambda_sq: f64, sigma_hat_sq: f64, a: f64, b: f64) -> f64 {
    Denoiser::WithSi {
        prior: PriorModel::Bdd(prior),
        sigma_hat_sq,
    }
    .prepare(lambda_sq)
    .eta(a, b)
}

/// Gaussian-Gaussian conditional denoiser,
/// `σ_X² (σ̂² a + λ² b) / (σ_X² (σ̂² + λ²) + λ² σ̂²)`.
pub fn eta_gg(prior: GgPrior, lambda_sq: f64, sigma_hat_sq: f64, a: f64, b: f64) -> f64 {
    Denoiser::WithSi {
        prior: PriorModel::Gg(prior),
        sigma_hat_sq,
    }
    .prepare(lambda_sq)
    .eta(a, b)
}

/// Bernoulli-Gaussian MMSE denoiser without side information.
pub fn eta_bg_no_si(prior: BgPrior, lambda_sq: f64, a: f64) -> f64 {
    Denoiser::NoSi(PriorModel::Bg(prior)).prepare(lambda_sq).eta(a, 0.0)
}

/// `∂η/∂a` of [`eta_bg_no_si`].
pub fn eta_bg_no_si_prime(prior: BgPrior, lambda_sq: f64, a: f64) -> f64 {
    Denoiser::NoSi(PriorModel::Bg(prior)).prepare(lambda_sq).eval(a, 0.0).1
}

/// Scalar Wiener filter `E[X | X + σZ = y]` for `X ~ N(0, signal_var)`.
pub fn wiener(y: f64, signal_var: f64, noise_var: f64) -> f64 {
    signal_var * y / (signal_var + noise_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bg(e: f64) -> BgPrior {
        BgPrior::new(e).unwrap()
    }

    fn fd<F: Fn(f64) -> f64>(f: F, a: f64) -> f64 {
        let h = 1e-5 * a.abs().max(1.0);
        (f(a + h) - f(a - h)) / (2.0 * h)
    }

    #[test]
    fn origin_maps_to_zero() {
        assert_eq!(eta_bg(bg(0.3), 0.25, 0.01, 0.0, 0.0), 0.0);
        let bdd = BddPrior::batch_experiment();
        assert_eq!(eta_bdd(bdd, 0.5, 0.2, 0.0, 0.0), 0.0);
        let gg = GgPrior::new(1.0).unwrap();
        assert_eq!(eta_gg(gg, 1.0, 1.0, 0.0, 0.0), 0.0);
        assert_eq!(eta_bg_no_si(bg(0.3), 1.0, 0.0), 0.0);
    }

    #[test]
    fn sparsity_limits() {
        let (l, s, a, b) = (0.25, 0.01, 1.0, 0.9);
        let weighted = (a * s + b * l) / (s + l + s * l);
        let dense = eta_bg(bg(1.0 - 1e-12), l, s, a, b);
        assert_relative_eq!(dense, weighted, max_relative = 1e-9);
        let sparse = eta_bg(bg(1e-12), l, s, 0.05, 0.02);
        assert!(sparse.abs() < 1e-9);
    }

    #[test]
    fn gg_hand_value() {
        // σ_X² = σ̂² = λ² = 1, a = b = 1: (1 + 1) / (2 + 1).
        let gg = GgPrior::new(1.0).unwrap();
        assert_relative_eq!(eta_gg(gg, 1.0, 1.0, 1.0, 1.0), 2.0 / 3.0, epsilon = 1e-15);
        let ctx = DenoiserContext::new(PriorModel::Gg(gg), 1.0, 1.0).unwrap();
        for &(a, b) in &[(0.0, 0.0), (3.0, -2.0), (-4.0, 1.5)] {
            assert_relative_eq!(ctx.eta_prime(a, b), 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn no_si_dense_prior_is_wiener() {
        for &(l, a) in &[(1.0, 2.0), (0.3, -1.2)] {
            assert_relative_eq!(eta_bg_no_si(bg(1.0), l, a), a / (1.0 + l), epsilon = 1e-15);
        }
    }

    #[test]
    fn bg_dense_derivative_is_constant() {
        let (l, s) = (0.25, 0.01);
        let ctx = DenoiserContext::new(PriorModel::Bg(bg(1.0)), l, s).unwrap();
        for &(a, b) in &[(1.0, 0.9), (-3.0, 2.0)] {
            assert_relative_eq!(ctx.eta_prime(a, b), s / (s + l + s * l), epsilon = 1e-14);
        }
    }

    #[test]
    fn derivative_matches_finite_difference_on_named_point() {
        let ctx = DenoiserContext::new(PriorModel::Bg(bg(0.3)), 0.25, 0.01).unwrap();
        let num = fd(|a| ctx.eta(a, 0.9), 1.0);
        assert!((ctx.eta_prime(1.0, 0.9) - num).abs() < 1e-4);
    }

    #[test]
    fn exact_si_branches() {
        assert_eq!(eta_bg(bg(0.3), 0.5, 0.0, 1.7, -0.4), -0.4);
        assert_eq!(eta_bg(bg(0.3), 0.5, 0.0, 1.7, 0.0), 0.0);
        let gg = GgPrior::new(2.0).unwrap();
        assert_eq!(eta_gg(gg, 0.5, 0.0, 1.7, 0.3), 0.3);
        let bdd = BddPrior::batch_experiment();
        let v = eta_bdd(bdd, 0.5, 0.0, 1.2, 0.8);
        assert!(v.is_finite());
        // Continuity with a tiny positive SI variance.
        let w = eta_bdd(bdd, 0.5, 1e-10, 1.2, 0.8);
        assert_relative_eq!(v, w, max_relative = 1e-4);
        let z = eta_bdd(bdd, 0.5, 0.0, 1.2, 0.0);
        let z2 = eta_bdd(bdd, 0.5, 1e-12, 1.2, 0.0);
        assert_relative_eq!(z, z2, max_relative = 1e-4);
    }

    #[test]
    fn noiseless_pseudo_data_returns_a() {
        assert_eq!(eta_bg(bg(0.3), 0.0, 0.1, 1.3, 0.0), 1.3);
        let bdd = BddPrior::batch_experiment();
        assert_eq!(eta_bdd(bdd, 0.0, 0.1, -0.7, 2.0), -0.7);
    }

    #[test]
    fn far_tails_stay_finite() {
        let bdd = BddPrior::batch_experiment();
        for &a in &[-100.0, 100.0] {
            for &b in &[-100.0, 100.0] {
                assert!(eta_bg(bg(0.3), 0.25, 0.01, a, b).is_finite());
                assert!(eta_bdd(bdd, 0.5, 0.2, a, b).is_finite());
                let ctx = DenoiserContext::new(PriorModel::Bdd(bdd), 0.5, 0.2).unwrap();
                assert!(ctx.eta_prime(a, b).is_finite());
            }
        }
    }

    #[test]
    fn bg_reduction_of_bdd() {
        let p = bg(0.3);
        let bdd = BddPrior::from_bg(p);
        for i in 0..7 {
            for j in 0..7 {
                let a = -3.0 + i as f64;
                let b = -3.0 + j as f64;
                let x = eta_bg(p, 0.4, 0.05, a, b);
                let y = eta_bdd(bdd, 0.4, 0.05, a, b);
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
            }
        }
    }
}
