//! Closed-form denoisers against the brute-force posterior oracles.
//!
//! The full-size BDD check (10⁷ samples per point) lives in the acceptance
//! suite; here the BDD grid runs at 10⁶ samples.

use ampsi_core::denoise::{eta_bdd, eta_bg, eta_bg_no_si, eta_gg};
use ampsi_core::models::{BddPrior, BgPrior, GgPrior, PriorModel};
use ampsi_core::oracle::{oracle_posterior_mean_mc, oracle_posterior_mean_quadrature};

fn close(closed: f64, oracle: f64) -> bool {
    (closed - oracle).abs() <= (1e-8 * oracle.abs()).max(1e-10)
}

fn grid9() -> impl Iterator<Item = (f64, f64)> {
    (0..9).flat_map(|i| (0..9).map(move |j| (-4.0 + i as f64, -4.0 + j as f64)))
}

#[test]
fn bg_matches_quadrature_on_grid() {
    for &(eps, l, s) in &[(0.3, 0.25, 0.01), (0.1, 1.0, 0.5), (0.7, 0.04, 2.0)] {
        let prior = BgPrior::new(eps).unwrap();
        for (a, b) in grid9() {
            let c = eta_bg(prior, l, s, a, b);
            let o = oracle_posterior_mean_quadrature(PriorModel::Bg(prior), l, s, a, b).unwrap();
            assert!(close(c, o), "eps={eps} l={l} s={s} ({a},{b}): {c} vs {o}");
        }
    }
}

#[test]
fn gg_matches_quadrature_on_grid() {
    for &(sx, l, s) in &[(1.0, 1.0, 1.0), (2.0, 0.3, 0.05), (0.5, 3.0, 0.8)] {
        let prior = GgPrior::new(sx).unwrap();
        for (a, b) in grid9() {
            let c = eta_gg(prior, l, s, a, b);
            let o = oracle_posterior_mean_quadrature(PriorModel::Gg(prior), l, s, a, b).unwrap();
            assert!(close(c, o), "sx={sx} ({a},{b}): {c} vs {o}");
        }
    }
}

#[test]
fn bg_named_example() {
    let prior = BgPrior::new(0.3).unwrap();
    let c = eta_bg(prior, 0.25, 0.01, 1.0, 0.9);
    let o = oracle_posterior_mean_quadrature(PriorModel::Bg(prior), 0.25, 0.01, 1.0, 0.9).unwrap();
    assert!(close(c, o), "{c} vs {o}");
}

#[test]
fn bg_no_si_matches_quadrature() {
    let prior = BgPrior::new(0.3).unwrap();
    for &(l, a) in &[(1.0, 2.0), (0.25, -1.3), (0.01, 0.2), (2.0, 6.0)] {
        let c = eta_bg_no_si(prior, l, a);
        let o = oracle_posterior_mean_quadrature(PriorModel::Bg(prior), l, f64::INFINITY, a, 0.0).unwrap();
        assert!(close(c, o), "l={l} a={a}: {c} vs {o}");
    }
}

#[test]
fn bdd_matches_importance_sampling() {
    let prior = BddPrior::batch_experiment();
    let mut seed = 100;
    for i in 0..5 {
        for j in 0..5 {
            let (a, b) = (-2.0 + i as f64, -2.0 + j as f64);
            let c = eta_bdd(prior, 0.5, 0.2, a, b);
            let est = oracle_posterior_mean_mc(prior, 0.5, 0.2, a, b, 1_000_000, seed).unwrap();
            seed += 1;
            assert!(
                (c - est.mean).abs() < 3.0 * est.stderr,
                "({a},{b}): closed {c} vs {} ± {}",
                est.mean,
                est.stderr
            );
        }
    }
}

#[test]
fn quadrature_and_mc_oracles_agree_on_bg() {
    // BG embedded as BDD: ε₂ = ε₄ = 0, ρ = 1, σ_s² = 1.
    let bg = BgPrior::new(0.3).unwrap();
    let bdd = BddPrior::from_bg(bg);
    for (k, &(a, b)) in [(1.0, 0.9), (-0.5, 0.2), (2.0, 1.5)].iter().enumerate() {
        let q = oracle_posterior_mean_quadrature(PriorModel::Bg(bg), 0.5, 0.3, a, b).unwrap();
        let m = oracle_posterior_mean_mc(bdd, 0.5, 0.3, a, b, 500_000, 7 + k as u64).unwrap();
        assert!((q - m.mean).abs() < 3.0 * m.stderr, "{q} vs {m:?}");
    }
}
