use ampsi_core::amp::{amp_run, onsager_coeff, run_no_si};
use ampsi_core::denoise::DenoiserContext;
use ampsi_core::measurement::{make_dense, measure};
use ampsi_core::models::{make_si, sample_bg, sample_spike_slab, BgPrior, GgPrior, SiChannel, SpikeSlab};
use ampsi_core::{AmpConfig, Denoiser, Error, LambdaMode, PriorModel};

fn bg_instance(n: usize, m: usize, seed: u64) -> (ampsi_core::MeasurementOperator, ampsi_core::Measurements, Vec<f64>, Vec<f64>) {
    let prior = BgPrior::new(0.3).unwrap();
    let x = sample_bg(prior, n, seed);
    let si = make_si(&x, SiChannel::new(0.01).unwrap(), seed + 1);
    let op = make_dense(m, n, seed + 2).unwrap();
    let meas = measure(&op, &x, 0.1, seed + 3).unwrap();
    (op, meas, x, si)
}

fn fixed(iters: usize) -> AmpConfig {
    AmpConfig {
        max_iters: iters,
        convergence_tol: 0.0,
        ..AmpConfig::default()
    }
}

#[test]
fn first_step_sees_back_projection() {
    let (op, meas, x, si) = bg_instance(400, 120, 1);
    let den = Denoiser::with_si(PriorModel::Bg(BgPrior::new(0.3).unwrap()), 0.01).unwrap();
    let out = amp_run(&op, &meas, &den, Some(&si), &fixed(1), Some(&x)).unwrap();
    let aty = op.apply_adjoint(&meas.y).unwrap();
    assert_eq!(out.pseudo, aty);
    let r0: f64 = meas.y.iter().map(|v| v * v).sum::<f64>() / meas.y.len() as f64;
    assert!((out.trace[0].residual_energy - r0).abs() < 1e-14 * r0);
}

#[test]
fn zero_damping_is_bit_identical() {
    let (op, meas, x, si) = bg_instance(600, 180, 2);
    let den = Denoiser::with_si(PriorModel::Bg(BgPrior::new(0.3).unwrap()), 0.01).unwrap();
    let undamped = amp_run(&op, &meas, &den, Some(&si), &fixed(15), Some(&x)).unwrap();
    let beta0 = AmpConfig {
        damping: 0.0,
        ..fixed(15)
    };
    let again = amp_run(&op, &meas, &den, Some(&si), &beta0, Some(&x)).unwrap();
    assert!(undamped.x_hat.iter().zip(&again.x_hat).all(|(p, q)| p.to_bits() == q.to_bits()));
    assert_eq!(undamped.trace, again.trace);
}

#[test]
fn useless_si_reproduces_plain_amp() {
    let (op, meas, x, _) = bg_instance(800, 240, 3);
    let prior = PriorModel::Bg(BgPrior::new(0.3).unwrap());
    let den = Denoiser::with_si(prior, 1e12).unwrap();
    // SI drawn from the channel has entries of order 10⁶ and still moves η by
    // about 10⁻⁶λ² per entry, so the per-iterate check is on the RMS.
    let junk = make_si(&x, SiChannel::new(1e12).unwrap(), 99);
    for iters in 1..=20 {
        let with = amp_run(&op, &meas, &den, Some(&junk), &fixed(iters), Some(&x)).unwrap();
        let without = run_no_si(&op, &meas, prior, &fixed(iters), Some(&x)).unwrap();
        let rms = (with.x_hat.iter().zip(&without.x_hat).map(|(p, q)| (p - q).powi(2)).sum::<f64>()
            / x.len() as f64)
            .sqrt();
        assert!(rms < 1e-6, "iterate {iters}: rms deviation {rms:e}");
    }
    let zero_si = vec![0.0; x.len()];
    let with = amp_run(&op, &meas, &den, Some(&zero_si), &fixed(20), Some(&x)).unwrap();
    let without = run_no_si(&op, &meas, prior, &fixed(20), Some(&x)).unwrap();
    for (p, q) in with.trace.iter().zip(&without.trace) {
        assert!((p.mse.unwrap() - q.mse.unwrap()).abs() < 1e-6);
    }
    let dev = with.x_hat.iter().zip(&without.x_hat).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-6, "{dev}");
}

#[test]
fn no_si_wrapper_matches_engine() {
    let (op, meas, x, _) = bg_instance(300, 90, 4);
    let prior = PriorModel::Bg(BgPrior::new(0.3).unwrap());
    let a = run_no_si(&op, &meas, prior, &fixed(10), Some(&x)).unwrap();
    let b = amp_run(&op, &meas, &Denoiser::NoSi(prior), None, &fixed(10), Some(&x)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gaussian_noiseless_overdetermined_converges() {
    // At δ = 1 the GG recursion only decays like 1/t; δ = 2 contracts geometrically.
    let n = 500;
    let x = sample_spike_slab(SpikeSlab { epsilon: 1.0, slab_var: 1.0 }, n, 5);
    let op = make_dense(2 * n, n, 6).unwrap();
    let meas = measure(&op, &x, 0.0, 7).unwrap();
    let den = Denoiser::with_si(PriorModel::Gg(GgPrior::new(1.0).unwrap()), 1e12).unwrap();
    let out = amp_run(&op, &meas, &den, Some(&vec![0.0; n]), &fixed(30), Some(&x)).unwrap();
    let energy = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mses: Vec<f64> = out.trace.iter().map(|r| r.mse.unwrap() / energy).collect();
    assert!(mses.windows(2).all(|w| w[1] <= w[0]), "{mses:?}");
    assert!(*mses.last().unwrap() < 1e-4);
}

#[test]
fn dense_prior_without_si_recovers_truth() {
    let n = 400;
    let x = sample_spike_slab(SpikeSlab { epsilon: 1.0, slab_var: 1.0 }, n, 8);
    let op = make_dense(2 * n, n, 9).unwrap();
    let meas = measure(&op, &x, 0.0, 10).unwrap();
    let out = run_no_si(&op, &meas, PriorModel::Bg(BgPrior::new(1.0).unwrap()), &AmpConfig::default(), Some(&x)).unwrap();
    assert!(out.trace.last().unwrap().mse.unwrap() < 1e-8);
}

#[test]
fn converges_and_stops_early() {
    let n = 400;
    let x = sample_spike_slab(SpikeSlab { epsilon: 1.0, slab_var: 1.0 }, n, 11);
    let op = make_dense(3 * n, n, 12).unwrap();
    let meas = measure(&op, &x, 0.01, 13).unwrap();
    let cfg = AmpConfig { max_iters: 200, ..AmpConfig::default() };
    let out = run_no_si(&op, &meas, PriorModel::Gg(GgPrior::new(1.0).unwrap()), &cfg, None).unwrap();
    assert!(out.converged);
    assert!(out.trace.len() < 200);
}

#[test]
fn schedule_mode_uses_given_lambdas() {
    let (op, meas, x, si) = bg_instance(300, 90, 14);
    let den = Denoiser::with_si(PriorModel::Bg(BgPrior::new(0.3).unwrap()), 0.01).unwrap();
    let cfg = AmpConfig {
        lambda_mode: LambdaMode::Schedule(vec![1.0, 0.5, 0.25]),
        ..fixed(5)
    };
    let out = amp_run(&op, &meas, &den, Some(&si), &cfg, Some(&x)).unwrap();
    let used: Vec<f64> = out.trace.iter().map(|r| r.lambda_sq).collect();
    assert_eq!(used, vec![1.0, 0.5, 0.25, 0.25, 0.25]);
}

#[test]
fn rejects_bad_inputs() {
    let (op, meas, x, si) = bg_instance(100, 30, 15);
    let den = Denoiser::with_si(PriorModel::Bg(BgPrior::new(0.3).unwrap()), 0.01).unwrap();
    assert!(matches!(
        amp_run(&op, &meas, &den, Some(&si[..50]), &fixed(3), None),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(amp_run(&op, &meas, &den, None, &fixed(3), None).is_err());
    let bad = AmpConfig { damping: 1.0, ..fixed(3) };
    assert!(amp_run(&op, &meas, &den, Some(&si), &bad, Some(&x)).is_err());
}

#[test]
fn blowup_is_reported_as_divergence() {
    // A Gaussian prior with a wildly overstated variance denoises by almost
    // nothing, so at δ = 0.05 the noise level grows about twentyfold per step.
    let n = 2000;
    let x = sample_spike_slab(SpikeSlab { epsilon: 1.0, slab_var: 1.0 }, n, 16);
    let op = make_dense(100, n, 17).unwrap();
    let meas = measure(&op, &x, 0.1, 18).unwrap();
    let den = Denoiser::NoSi(PriorModel::Gg(GgPrior::new(1e9).unwrap()));
    match amp_run(&op, &meas, &den, None, &fixed(30), None) {
        Err(Error::Divergence { iteration, .. }) => assert!(iteration > 0),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.trace.len())),
    }
}

#[test]
fn onsager_coefficient_examples() {
    let gg = DenoiserContext::new(PriorModel::Gg(GgPrior::new(1.0).unwrap()), 1.0, 1.0).unwrap();
    let pseudo = [0.3, -1.0, 2.0, 5.0];
    let si = [1.0, 0.0, -0.5, 0.2];
    let c = onsager_coeff(&pseudo, &si, &gg.prepare(), 0.5).unwrap();
    assert!((c - (1.0 / 3.0) / 0.5).abs() < 1e-14);

    let dense = DenoiserContext::new(PriorModel::Bg(BgPrior::new(1.0).unwrap()), 0.5, 0.2).unwrap();
    let c = onsager_coeff(&pseudo, &si, &dense.prepare(), 0.3).unwrap();
    let expect = 0.2 / (0.3 * (0.2 + 0.5 + 0.2 * 0.5));
    assert!((c - expect).abs() < 1e-13);

    let sparse = DenoiserContext::new(PriorModel::Bg(BgPrior::new(0.3).unwrap()), 0.5, 0.2).unwrap();
    let zeros = [0.0; 7];
    let c = onsager_coeff(&zeros, &zeros, &sparse.prepare(), 0.3).unwrap();
    assert!((c - sparse.eta_prime(0.0, 0.0) / 0.3).abs() < 1e-14);
    assert!(onsager_coeff(&zeros, &zeros[..3], &sparse.prepare(), 0.3).is_err());
}
