//! Experiment drivers. Each returns its tables plus the typed numbers the
//! acceptance suite checks.

use ampsi_core::amp::run_with_si;
use ampsi_core::measurement::{make_dense, make_toeplitz, measure};
use ampsi_core::models::{make_si, sample_bg, sample_spike_slab, SiChannel, SpikeSlab};
use ampsi_core::rng::{stream_seed, Stream};
use ampsi_core::se::{phase_grid, se_batches, se_run, PhaseFamily, SeConfig, SeTrace};
use ampsi_core::stats::{norm_sq, RunningStats};
use ampsi_core::{AmpConfig, BddPrior, LambdaMode, MeasurementOperator, PriorModel, SideInfo};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LambdaChoice, MatrixKind, Normalization, PriorSpec, SiSpec};
use crate::output::{Cell, Table};
use crate::pipeline::{check_chaining, run_arms, run_chain, BatchRecord, ChainSpec};
use crate::CliError;

/// z-value of a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;
/// Stopping tolerance of the undamped i.i.d. arm of the Table II experiment.
pub const IID_ARM_TOL: f64 = 1e-8;

/// Tables ready to persist, keyed by file stem.
pub type Tables = Vec<(String, Table)>;

pub fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// SNR label of a noise level for a unit-variance steady state.
pub fn snr_db(sigma_z: f64) -> f64 {
    // `+ 0.0` turns the −0 of σ_z = 1 into 0.
    -20.0 * sigma_z.log10() + 0.0
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("worker pool: {e}")))
}

/// Runs `f` for every trial on the worker pool, in trial order. Diverged
/// trials are dropped unless more than 10% diverge.
fn run_trials<T, F>(cfg: &ExperimentConfig, notes: &mut Vec<String>, f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(u64) -> ampsi_core::Result<T> + Sync,
{
    let results: Vec<ampsi_core::Result<T>> =
        pool(cfg.workers)?.install(|| (0..cfg.trials as u64).into_par_iter().map(&f).collect());
    let mut ok = Vec::with_capacity(results.len());
    let mut diverged = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e @ ampsi_core::Error::Divergence { .. }) => diverged.push(format!("trial {t}: {e}")),
            Err(e) => return Err(CliError::Numerical(e)),
        }
    }
    if diverged.len() * 10 > cfg.trials {
        return Err(CliError::Divergence(format!(
            "{} of {} trials diverged; first: {}",
            diverged.len(),
            cfg.trials,
            diverged[0]
        )));
    }
    notes.extend(diverged.into_iter().map(|d| format!("dropped {d}")));
    Ok(ok)
}

fn mean_ci(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut s = RunningStats::new();
    values.into_iter().for_each(|v| s.push(v));
    let ci = if s.count() > 1 { Z95 * s.stderr() } else { 0.0 };
    (s.mean(), ci)
}

fn amp_config(cfg: &ExperimentConfig) -> AmpConfig {
    AmpConfig {
        max_iters: cfg.amp.iterations,
        damping: cfg.amp.damping,
        lambda_mode: LambdaMode::EmpiricalResidual,
        convergence_tol: cfg.amp.convergence_tol,
    }
}

fn bdd(cfg: &ExperimentConfig) -> Result<BddPrior, CliError> {
    match cfg.prior.model()? {
        PriorModel::Bdd(p) => Ok(p),
        _ => Err(CliError::Usage("this experiment needs a BDD prior".into())),
    }
}

fn chain_spec(cfg: &ExperimentConfig, sigma_z: f64, matrix: MatrixKind, amp: AmpConfig) -> Result<ChainSpec, CliError> {
    Ok(ChainSpec {
        prior: bdd(cfg)?,
        n: cfg.n,
        m: cfg.m,
        pilot_len: cfg.pilot_len,
        matrix,
        sigma_z,
        batches: cfg.batches,
        amp,
    })
}

fn normalize(cfg: &ExperimentConfig, rec: &BatchRecord) -> f64 {
    match cfg.normalization {
        Normalization::PerEntry => rec.mse(),
        Normalization::PerEnergy => rec.normalized_mse(),
    }
}

/// SE MSE `δ(λ² − σ_z²)` under the configured normalization.
fn se_mse(cfg: &ExperimentConfig, prior: PriorModel, lambda_sq: f64, delta: f64, sigma_z_sq: f64) -> f64 {
    let mse = delta * (lambda_sq - sigma_z_sq);
    match cfg.normalization {
        Normalization::PerEntry => mse,
        Normalization::PerEnergy => mse / prior.second_moment(),
    }
}

fn sample_prior(prior: PriorModel, n: usize, seed: u64) -> ampsi_core::Result<Vec<f64>> {
    match prior {
        PriorModel::Bg(p) => Ok(sample_bg(p, n, seed)),
        PriorModel::Gg(p) => Ok(sample_spike_slab(
            SpikeSlab {
                epsilon: 1.0,
                slab_var: p.sigma_x_sq(),
            },
            n,
            seed,
        )),
        PriorModel::Bdd(_) => Err(ampsi_core::Error::UnsupportedModel("bdd")),
    }
}

fn operator(cfg: &ExperimentConfig, seed: u64) -> ampsi_core::Result<MeasurementOperator> {
    match cfg.matrix {
        MatrixKind::Dense => make_dense(cfg.m, cfg.n, seed),
        MatrixKind::Toeplitz => make_toeplitz(cfg.pilot_len, cfg.n, seed),
    }
}

#[derive(Debug, Clone)]
pub struct Fig4Result {
    pub tables: Tables,
    /// Mean normalized MSE after iteration `t + 1`, and its 95% half-width.
    pub empirical: Vec<(f64, f64)>,
    /// SE prediction for the same iterations.
    pub se: Vec<f64>,
    /// Mean `‖xᵗ + Aᵀrᵗ − x‖² / N` for `t = 0, 1, …`.
    pub pseudo_error: Vec<f64>,
    /// SE `λ_t²` for the same `t`.
    pub se_lambda_sq: Vec<f64>,
    pub trials_used: usize,
    pub notes: Vec<String>,
}

/// Single-batch AMP-SI with Gaussian SI against its SE trajectory.
pub fn run_fig4(cfg: &ExperimentConfig) -> Result<Fig4Result, CliError> {
    let prior = cfg.prior.model()?;
    let SiSpec::Gaussian(sigma_hat) = cfg.sigma_hat else {
        return Err(CliError::Usage("fig4 needs a numeric sigma_hat".into()));
    };
    let s2 = sigma_hat * sigma_hat;
    let sz = cfg.sigma_z[0];
    let delta = cfg.delta();
    let iters = cfg.amp.iterations;
    let trace = se_run(
        prior,
        Some(s2),
        delta,
        sz * sz,
        SeConfig {
            t_max: iters,
            tol: 0.0,
            ..cfg.se.core()
        },
    )?;
    let mut amp = amp_config(cfg);
    if cfg.amp.lambda == LambdaChoice::Se {
        amp.lambda_mode = LambdaMode::Schedule(trace.lambda_sq_seq.clone());
    }

    let mut notes = Vec::new();
    let runs = run_trials(cfg, &mut notes, |t| {
        let seed = |s| stream_seed(cfg.seed, t, 1, s);
        let x = sample_prior(prior, cfg.n, seed(Stream::Signal))?;
        let si = make_si(&x, SiChannel::new(s2)?, seed(Stream::SiNoise));
        let op = operator(cfg, seed(Stream::Matrix))?;
        let meas = measure(&op, &x, sz, seed(Stream::MeasurementNoise))?;
        let out = run_with_si(&op, &meas, prior, SideInfo { values: &si, sigma_hat_sq: s2 }, &amp, Some(&x))?;
        let scale = match cfg.normalization {
            Normalization::PerEntry => 1.0,
            Normalization::PerEnergy => cfg.n as f64 / norm_sq(&x).max(f64::MIN_POSITIVE),
        };
        let mse: Vec<f64> = out.trace.iter().map(|r| r.mse.unwrap() * scale).collect();
        let pseudo: Vec<f64> = out.trace.iter().map(|r| r.pseudo_error.unwrap()).collect();
        Ok((mse, pseudo))
    })?;

    // Early stopping would leave ragged traces; pad with the final value.
    let at = |v: &Vec<f64>, i: usize| v.get(i).or(v.last()).copied().unwrap_or(f64::NAN);
    let empirical: Vec<(f64, f64)> = (0..iters).map(|i| mean_ci(runs.iter().map(|r| at(&r.0, i)))).collect();
    let pseudo_error: Vec<f64> = (0..iters).map(|i| mean_ci(runs.iter().map(|r| at(&r.1, i))).0).collect();
    let sz2 = sz * sz;
    let se: Vec<f64> = (1..=iters).map(|t| se_mse(cfg, prior, trace.lambda_sq_seq[t], delta, sz2)).collect();

    let mut table = Table::new(&["iter", "empirical_mse_mean", "empirical_mse_ci", "se_mse"]);
    for i in 0..iters {
        table.push(vec![(i + 1).into(), empirical[i].0.into(), empirical[i].1.into(), se[i].into()]);
    }
    let mut pt = Table::new(&["t", "pseudo_error_mean", "se_lambda_sq"]);
    for (i, (&e, &l)) in pseudo_error.iter().zip(&trace.lambda_sq_seq).enumerate() {
        pt.push(vec![i.into(), e.into(), l.into()]);
    }
    Ok(Fig4Result {
        tables: vec![("fig4".into(), table), ("fig4_pseudo".into(), pt)],
        empirical,
        se,
        pseudo_error,
        se_lambda_sq: trace.lambda_sq_seq[..iters].to_vec(),
        trials_used: runs.len(),
        notes,
    })
}

#[derive(Debug, Clone)]
pub struct Fig5Result {
    pub tables: Tables,
    /// Final normalized MSE per trial and batch: `(amp, ampsi)`.
    pub finals: Vec<Vec<(f64, f64)>>,
    /// Whether both arms produced bit-identical first batches in every trial.
    pub batch1_identical: bool,
    pub notes: Vec<String>,
}

impl Fig5Result {
    /// Upper end of the one-sided 95% interval for the mean of
    /// `mse_ampsi − mse_amp` at each batch (1-based index `b` at `b − 1`).
    pub fn diff_upper95(&self) -> Vec<f64> {
        let batches = self.finals.first().map_or(0, Vec::len);
        (0..batches)
            .map(|b| {
                let mut s = RunningStats::new();
                self.finals.iter().for_each(|f| s.push(f[b].1 - f[b].0));
                s.mean() + Z95_ONE_SIDED * s.stderr()
            })
            .collect()
    }
}

/// BDD batch sequence: plain AMP against chained AMP-SI on matched seeds.
pub fn run_fig5(cfg: &ExperimentConfig) -> Result<Fig5Result, CliError> {
    let spec = chain_spec(cfg, cfg.sigma_z[0], cfg.matrix, amp_config(cfg))?;
    let mut notes = Vec::new();
    let runs = run_trials(cfg, &mut notes, |t| {
        let mut arms = run_arms(&spec, cfg.seed, t, &[false, true])?;
        let si = arms.pop().unwrap();
        Ok((arms.pop().unwrap(), si))
    })?;
    for (_, si) in &runs {
        check_chaining(si)?;
    }
    let batch1_identical = runs.iter().all(|(p, s)| {
        p[0].estimate.iter().zip(&s[0].estimate).all(|(a, b)| a.to_bits() == b.to_bits())
            && p[0].mse_trace == s[0].mse_trace
    });
    let norm = |r: &BatchRecord, v: f64| match cfg.normalization {
        Normalization::PerEntry => v,
        Normalization::PerEnergy => v / r.energy().max(f64::MIN_POSITIVE),
    };

    let mut per_iter = Table::new(&["batch", "iter", "mse_amp", "mse_ampsi"]);
    for b in 0..cfg.batches {
        let len = runs[0].0[b].mse_trace.len();
        for i in 0..len {
            let (a, _) = mean_ci(runs.iter().map(|(p, _)| norm(&p[b], p[b].mse_trace[i])));
            let (s, _) = mean_ci(runs.iter().map(|(_, s)| norm(&s[b], s[b].mse_trace[i])));
            per_iter.push(vec![(b + 1).into(), (i + 1).into(), a.into(), s.into()]);
        }
    }
    let finals: Vec<Vec<(f64, f64)>> = runs
        .iter()
        .map(|(p, s)| p.iter().zip(s).map(|(a, b)| (normalize(cfg, a), normalize(cfg, b))).collect())
        .collect();
    let mut result = Fig5Result {
        tables: Vec::new(),
        finals,
        batch1_identical,
        notes,
    };
    let upper = result.diff_upper95();
    let mut summary = Table::new(&["batch", "mse_amp", "mse_ampsi", "diff_mean", "diff_upper95"]);
    for b in 0..cfg.batches {
        let (a, _) = mean_ci(result.finals.iter().map(|f| f[b].0));
        let (s, _) = mean_ci(result.finals.iter().map(|f| f[b].1));
        summary.push(vec![(b + 1).into(), a.into(), s.into(), (s - a).into(), upper[b].into()]);
    }
    result.tables = vec![("fig5".into(), per_iter), ("fig5_batches".into(), summary)];
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCell {
    pub sigma_z: f64,
    pub batch: usize,
    pub mse_db: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelResult {
    pub tables: Tables,
    pub cells: Vec<ChannelCell>,
    pub notes: Vec<String>,
}

impl ChannelResult {
    pub fn get(&self, sigma_z: f64, batch: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.sigma_z == sigma_z && c.batch == batch)
            .map(|c| c.mse_db)
    }
}

/// Mean chained-AMP-SI MSE per batch, in dB, for every noise level.
fn chained_db(
    cfg: &ExperimentConfig,
    matrix: MatrixKind,
    amp: AmpConfig,
    notes: &mut Vec<String>,
) -> Result<Vec<ChannelCell>, CliError> {
    let mut cells = Vec::new();
    for &sz in &cfg.sigma_z {
        let spec = chain_spec(cfg, sz, matrix, amp.clone())?;
        let runs = run_trials(cfg, notes, |t| run_chain(&spec, cfg.seed, t, true))?;
        for r in &runs {
            check_chaining(r)?;
        }
        for b in 0..cfg.batches {
            let (mean, _) = mean_ci(runs.iter().map(|r| normalize(cfg, &r[b])));
            cells.push(ChannelCell {
                sigma_z: sz,
                batch: b + 1,
                mse_db: db(mean),
            });
        }
    }
    Ok(cells)
}

fn channel_table(cells: &[ChannelCell]) -> Table {
    let mut t = Table::new(&["snr_db", "sigma_z", "batch", "mse_db"]);
    for c in cells {
        t.push(vec![snr_db(c.sigma_z).into(), c.sigma_z.into(), c.batch.into(), c.mse_db.into()]);
    }
    t
}

/// Channel estimation with the configured (normally Toeplitz) matrices.
pub fn run_channel_estimation(cfg: &ExperimentConfig) -> Result<ChannelResult, CliError> {
    let mut notes = Vec::new();
    let cells = chained_db(cfg, cfg.matrix, amp_config(cfg), &mut notes)?;
    Ok(ChannelResult {
        tables: vec![("channel".into(), channel_table(&cells))],
        cells,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table2Row {
    pub sigma_z: f64,
    pub iid_db: f64,
    pub se_db: f64,
    pub toeplitz_db: f64,
}

#[derive(Debug, Clone)]
pub struct Table2Result {
    pub tables: Tables,
    pub rows: Vec<Table2Row>,
    /// Every batch of the Toeplitz arm.
    pub toeplitz: ChannelResult,
    pub se_traces: Vec<Vec<SeTrace>>,
    pub notes: Vec<String>,
}

/// Final-batch MSE of the Toeplitz pipeline, an undamped i.i.d. Gaussian arm
/// of the same size, and the chained SE prediction.
pub fn run_table2(cfg: &ExperimentConfig) -> Result<Table2Result, CliError> {
    let prior = PriorModel::Bdd(bdd(cfg)?);
    let mut notes = Vec::new();
    let toeplitz_cells = chained_db(cfg, MatrixKind::Toeplitz, amp_config(cfg), &mut notes)?;
    let iid_cfg = ExperimentConfig {
        m: cfg.rows(),
        ..cfg.clone()
    };
    let iid_amp = AmpConfig {
        damping: 0.0,
        convergence_tol: IID_ARM_TOL.max(cfg.amp.convergence_tol),
        ..amp_config(cfg)
    };
    let iid_cells = chained_db(&iid_cfg, MatrixKind::Dense, iid_amp, &mut notes)?;

    let delta = cfg.delta();
    let last = cfg.batches;
    let mut rows = Vec::new();
    let mut se_traces = Vec::new();
    let mut table = Table::new(&["snr_db", "sigma_z", "iid_mse_db", "se_mse_db", "toeplitz_mse_db"]);
    for &sz in &cfg.sigma_z {
        let traces = se_batches(prior, delta, sz * sz, last, cfg.se.core())?;
        let se_db = db(se_mse(cfg, prior, traces[last - 1].last(), delta, sz * sz));
        let pick = |cells: &[ChannelCell]| cells.iter().find(|c| c.sigma_z == sz && c.batch == last).unwrap().mse_db;
        let row = Table2Row {
            sigma_z: sz,
            iid_db: pick(&iid_cells),
            se_db,
            toeplitz_db: pick(&toeplitz_cells),
        };
        table.push(vec![
            snr_db(sz).into(),
            sz.into(),
            row.iid_db.into(),
            row.se_db.into(),
            row.toeplitz_db.into(),
        ]);
        rows.push(row);
        se_traces.push(traces);
    }
    let toeplitz = ChannelResult {
        tables: vec![("table2_toeplitz_batches".into(), channel_table(&toeplitz_cells))],
        cells: toeplitz_cells,
        notes: Vec::new(),
    };
    let mut tables = vec![("table2".to_string(), table)];
    tables.extend(toeplitz.tables.iter().cloned());
    tables.push(("table2_iid_batches".into(), channel_table(&iid_cells)));
    Ok(Table2Result {
        tables,
        rows,
        toeplitz,
        se_traces,
        notes,
    })
}

#[derive(Debug, Clone)]
pub struct PhaseResult {
    pub tables: Tables,
    pub cells: Vec<ampsi_core::se::PhaseCell>,
}

/// SE phase grid over `(δ, γ)`, one table per reported batch.
pub fn run_phase_grid(cfg: &ExperimentConfig) -> Result<PhaseResult, CliError> {
    let PriorSpec::Bdd { sigma_s, rho, .. } = cfg.prior else {
        return Err(CliError::Usage("phase needs a BDD prior".into()));
    };
    let family = PhaseFamily::Bdd {
        sigma_s_sq: sigma_s * sigma_s,
        rho,
    };
    let cells = phase_grid(
        family,
        &cfg.phase.deltas,
        &cfg.phase.gammas,
        &cfg.phase.report,
        cfg.sigma_z[0],
        cfg.se.core(),
    )?;
    let mut tables = Vec::new();
    for &b in &cfg.phase.report {
        let mut t = Table::new(&["delta", "gamma", "mse", "mse_db", "converged"]);
        for c in cells.iter().filter(|c| c.batch == b) {
            t.push(vec![
                c.delta.into(),
                c.gamma.into(),
                c.mse.into(),
                db(c.mse).into(),
                Cell::Int(c.converged as u64),
            ]);
        }
        tables.push((format!("phase_batch{b}"), t));
    }
    Ok(PhaseResult { tables, cells })
}

#[derive(Debug, Clone)]
pub struct SeResult {
    pub tables: Tables,
    pub traces: Vec<SeTrace>,
}

/// SE trajectory: one batch with Gaussian SI, or the chained batch sequence.
pub fn run_se(cfg: &ExperimentConfig) -> Result<SeResult, CliError> {
    let prior = cfg.prior.model()?;
    let sz2 = cfg.sigma_z[0] * cfg.sigma_z[0];
    let delta = cfg.delta();
    let traces = match cfg.sigma_hat {
        SiSpec::Gaussian(s) => vec![se_run(prior, Some(s * s), delta, sz2, cfg.se.core())?],
        SiSpec::Chained => se_batches(prior, delta, sz2, cfg.batches, cfg.se.core())?,
    };
    let mut t = Table::new(&["batch", "t", "lambda_sq", "mc_stderr", "mse"]);
    for (b, tr) in traces.iter().enumerate() {
        for (i, (&l, &e)) in tr.lambda_sq_seq.iter().zip(&tr.mc_stderr).enumerate() {
            t.push(vec![(b + 1).into(), i.into(), l.into(), e.into(), se_mse(cfg, prior, l, delta, sz2).into()]);
        }
    }
    Ok(SeResult {
        tables: vec![("se".into(), t)],
        traces,
    })
}
