use ampsi_core::models::{BddPrior, BgPrior, GgPrior, PriorModel};
use ampsi_core::se::{
    effective_channel, gg_step_exact, phase_grid, se_gaussian_si_step, se_run, se_step, PhaseFamily, SeConfig,
};

fn bg(eps: f64) -> PriorModel {
    PriorModel::Bg(BgPrior::new(eps).unwrap())
}

fn cfg(mc: usize, seed: u64) -> SeConfig {
    SeConfig { t_max: 200, mc, tol: 1e-6, seed }
}

#[test]
fn two_channel_and_matched_filter_steps_agree() {
    let prior = bg(0.3);
    let s = 0.01;
    let tr = se_run(prior, Some(s), 0.3, 0.01, SeConfig { t_max: 15, tol: 0.0, ..cfg(50_000, 1) }).unwrap();
    for (t, &l) in tr.lambda_sq_seq.iter().enumerate() {
        let two = se_step(prior, Some(s), l, 0.3, 0.01, 100_000, 10 + t as u64).unwrap();
        let one = se_gaussian_si_step(prior, s, l, 0.3, 0.01, 100_000, 500 + t as u64).unwrap();
        let slack = 3.0 * (two.stderr.powi(2) + one.stderr.powi(2)).sqrt();
        assert!((two.lambda_sq - one.lambda_sq).abs() <= slack, "t={t}: {two:?} vs {one:?}");
    }
}

#[test]
fn huge_si_noise_reduces_to_plain_se() {
    let prior = bg(0.3);
    for &l in &[1.01, 0.3, 0.05] {
        let a = se_gaussian_si_step(prior, 1e12, l, 0.3, 0.01, 20_000, 3).unwrap();
        let b = se_step(prior, None, l, 0.3, 0.01, 20_000, 3).unwrap();
        assert!((a.lambda_sq - b.lambda_sq).abs() < 1e-9 * b.lambda_sq);
    }
}

#[test]
fn gg_trajectory_matches_analytic_recursion() {
    let gg = PriorModel::Gg(GgPrior::new(1.0).unwrap());
    let tr = se_run(gg, Some(0.5), 0.6, 0.02, SeConfig { t_max: 10, tol: 0.0, ..cfg(200_000, 9) }).unwrap();
    for t in 1..tr.lambda_sq_seq.len() {
        let exact = gg_step_exact(1.0, 0.5, tr.lambda_sq_seq[t - 1], 0.6, 0.02);
        assert!((tr.lambda_sq_seq[t] - exact).abs() < 3.0 * tr.mc_stderr[t], "t={t}");
    }
}

#[test]
fn trajectories_are_non_increasing() {
    let configs: [(PriorModel, Option<f64>, f64, f64); 4] = [
        (bg(0.3), Some(0.01), 0.3, 0.01),
        (bg(0.3), None, 0.3, 0.01),
        (PriorModel::Bdd(BddPrior::batch_experiment()), None, 0.3, 0.077 * 0.077),
        (PriorModel::Bdd(BddPrior::channel_experiment()), Some(0.01), 1.25, 0.01),
    ];
    for (prior, s, d, sz2) in configs {
        let tr = se_run(prior, s, d, sz2, cfg(20_000, 4)).unwrap();
        for t in 1..tr.lambda_sq_seq.len() {
            assert!(tr.lambda_sq_seq[t] <= tr.lambda_sq_seq[t - 1] + 3.0 * tr.mc_stderr[t]);
            assert!(tr.lambda_sq_seq[t] >= sz2);
        }
        let mse = tr.mse_seq();
        assert_eq!(mse[0], d * (tr.lambda_sq_seq[0] - sz2));
    }
}

#[test]
fn fixed_point_grows_with_si_noise() {
    let mut prev = 0.0;
    for &s in &[1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let tr = se_run(bg(0.3), Some(s), 0.3, 0.01, cfg(20_000, 5)).unwrap();
        let fp = tr.fixed_point.expect("converges");
        assert!(fp >= prev - 3.0 * tr.fixed_point_stderr.unwrap(), "σ̂²={s}: {fp} < {prev}");
        prev = fp;
    }
    let plain = se_run(bg(0.3), None, 0.3, 0.01, cfg(20_000, 5)).unwrap();
    assert!(plain.fixed_point.unwrap() >= prev - 3.0 * plain.fixed_point_stderr.unwrap());
}

#[test]
fn effective_channel_fixed_point_identity() {
    let (delta, sz2, s) = (0.3, 0.01, 0.01);
    let si = se_run(bg(0.3), Some(s), delta, sz2, cfg(100_000, 6)).unwrap();
    let l = si.fixed_point.unwrap();
    let ch = effective_channel(delta, sz2, s, l).unwrap();
    let eff = se_run(bg(0.3), None, ch.delta_eff, ch.sigma_eff_sq, cfg(100_000, 7)).unwrap();
    // The no-SI fixed point is the matched-filter variance μλ∞².
    let target = ch.mu * l;
    let se_target = ch.mu * ch.mu * si.fixed_point_stderr.unwrap();
    let got = eff.fixed_point.unwrap();
    let slack = 3.0 * (se_target.powi(2) + eff.fixed_point_stderr.unwrap().powi(2)).sqrt();
    assert!((got - target).abs() <= slack, "{got} vs {target} ± {slack}");
}

#[test]
fn phase_grid_batches_improve() {
    let deltas = [0.2, 0.5, 0.8];
    let gammas = [0.1, 0.3, 0.5];
    let cells = phase_grid(
        PhaseFamily::Bdd { sigma_s_sq: 1.0, rho: 0.95 },
        &deltas,
        &gammas,
        &[1, 3, 10],
        0.01,
        SeConfig { t_max: 200, mc: 5000, tol: 1e-5, seed: 8 },
    )
    .unwrap();
    assert_eq!(cells.len(), 27);
    for chunk in cells.chunks(3) {
        let (b1, b3, b10) = (chunk[0].mse, chunk[1].mse, chunk[2].mse);
        let slack = 1e-3 * b1.max(1e-6);
        assert!(b3 <= b1 + slack && b10 <= b3 + slack, "{chunk:?}");
    }
    // Batch 1 is the no-SI recursion.
    let first = &cells[0];
    let family = PhaseFamily::Bdd { sigma_s_sq: 1.0, rho: 0.95 };
    let plain = se_run(family.prior(first.gamma).unwrap(), None, first.delta, 1e-4, SeConfig { t_max: 200, mc: 5000, tol: 1e-5, seed: 8 }).unwrap();
    assert_eq!(first.mse, first.delta * (plain.last() - 1e-4));
}
