//! Experiment configuration.
//!
//! A config file is TOML with flat sections. Every key is optional: values
//! not given fall back to the full-scale preset of the chosen experiment,
//! and command-line flags override both. The accepted keys:
//!
//! ```toml
//! [experiment]
//! seed = 2024          # master seed
//! trials = 20          # trials (realizations) per configuration
//! workers = 1          # worker threads; results do not depend on it
//!
//! [prior]
//! family = "bdd"       # "bg", "bdd" or "gg"
//! epsilon = 0.3        # bg
//! eps = [0.80, 0.01, 0.18, 0.01]   # bdd case probabilities
//! sigma_s = 1.0        # bdd steady-state standard deviation
//! rho = 0.95           # bdd drift correlation
//! sigma_x_sq = 1.0     # gg
//!
//! [problem]
//! n = 10000
//! m = 3000             # dense matrices
//! pilot_len = 1001     # Toeplitz matrices; m = pilot_len + n - 1
//! matrix = "dense"     # "dense" or "toeplitz"
//! sigma_z = [0.077]    # one entry per SNR row
//! sigma_hat = 0.1      # Gaussian SI level; "chained" for batch chaining
//! batches = 15
//!
//! [amp]
//! iterations = 30
//! damping = 0.0
//! convergence_tol = 0.0
//! lambda = "empirical" # or "se" to feed the SE schedule
//!
//! [se]
//! mc = 100000
//! t_max = 200
//! tol = 1e-6
//! seed = 7
//!
//! [phase]
//! deltas = [0.1, 0.2]
//! gammas = [0.05, 0.1]
//! report = [1, 3, 10]
//!
//! [output]
//! dir = "out"
//! normalization = "per-entry"   # or "per-energy"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ampsi_core::models::{BddPrior, BgPrior, GgPrior, PriorModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "AMPSI_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fig4,
    Fig5,
    Channel,
    Table2,
    Phase,
    Se,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Channel => "channel",
            Self::Table2 => "table2",
            Self::Phase => "phase",
            Self::Se => "se",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Dense,
    Toeplitz,
}

/// How MSE values are normalized before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `‖x̂ − x‖² / N`.
    PerEntry,
    /// `‖x̂ − x‖² / ‖x‖²`.
    PerEnergy,
}

impl FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-entry" => Ok(Self::PerEntry),
            "per-energy" => Ok(Self::PerEnergy),
            _ => Err(format!("unknown normalization `{s}` (per-entry, per-energy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaChoice {
    Empirical,
    Se,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PriorSpec {
    Bg { epsilon: f64 },
    Bdd { eps: [f64; 4], sigma_s: f64, rho: f64 },
    Gg { sigma_x_sq: f64 },
}

impl PriorSpec {
    pub fn model(&self) -> ampsi_core::Result<PriorModel> {
        Ok(match *self {
            Self::Bg { epsilon } => PriorModel::Bg(BgPrior::new(epsilon)?),
            Self::Bdd { eps, sigma_s, rho } => PriorModel::Bdd(BddPrior::new(eps, sigma_s * sigma_s, rho)?),
            Self::Gg { sigma_x_sq } => PriorModel::Gg(GgPrior::new(sigma_x_sq)?),
        })
    }
}

/// Side information for single-batch experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SiSpec {
    /// Signal plus Gaussian noise of this standard deviation.
    Gaussian(f64),
    /// The previous batch's pseudo-data.
    Chained,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmpSettings {
    pub iterations: usize,
    pub damping: f64,
    pub convergence_tol: f64,
    pub lambda: LambdaChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeSettings {
    pub mc: usize,
    pub t_max: usize,
    pub tol: f64,
    pub seed: u64,
}

impl SeSettings {
    pub fn core(&self) -> ampsi_core::se::SeConfig {
        ampsi_core::se::SeConfig {
            t_max: self.t_max,
            mc: self.mc,
            tol: self.tol,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSettings {
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub report: Vec<usize>,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
    pub prior: PriorSpec,
    pub n: usize,
    pub m: usize,
    pub pilot_len: usize,
    pub matrix: MatrixKind,
    pub sigma_z: Vec<f64>,
    pub sigma_hat: SiSpec,
    pub batches: usize,
    pub amp: AmpSettings,
    pub se: SeSettings,
    pub phase: PhaseSettings,
    pub normalization: Normalization,
    pub out_dir: PathBuf,
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

impl ExperimentConfig {
    /// Full-scale defaults.
    pub fn preset(kind: ExperimentKind) -> Self {
        let bdd_batch = PriorSpec::Bdd {
            eps: [0.80, 0.01, 0.18, 0.01],
            sigma_s: 1.0,
            rho: 0.95,
        };
        let bdd_channel = PriorSpec::Bdd {
            eps: [0.78, 0.01, 0.20, 0.01],
            sigma_s: 1.0,
            rho: 0.95,
        };
        let base = Self {
            kind,
            seed: 2024,
            trials: 20,
            workers: 1,
            prior: PriorSpec::Bg { epsilon: 0.3 },
            n: 10_000,
            m: 3000,
            pilot_len: 1001,
            matrix: MatrixKind::Dense,
            sigma_z: vec![0.1],
            sigma_hat: SiSpec::Gaussian(0.1),
            batches: 1,
            amp: AmpSettings {
                iterations: 30,
                damping: 0.0,
                convergence_tol: 0.0,
                lambda: LambdaChoice::Empirical,
            },
            se: SeSettings {
                mc: 200_000,
                t_max: 200,
                tol: 1e-7,
                seed: 7,
            },
            phase: PhaseSettings {
                deltas: grid(0.05, 1.0, 20),
                gammas: grid(0.025, 0.5, 20),
                report: vec![1, 3, 10],
            },
            normalization: Normalization::PerEnergy,
            out_dir: default_out_dir(),
        };
        match kind {
            ExperimentKind::Fig4 => Self {
                se: SeSettings { tol: 0.0, t_max: 30, ..base.se },
                ..base
            },
            ExperimentKind::Fig5 => Self {
                trials: 100,
                prior: bdd_batch,
                sigma_z: vec![0.077],
                sigma_hat: SiSpec::Chained,
                batches: 15,
                ..base
            },
            ExperimentKind::Channel | ExperimentKind::Table2 => Self {
                trials: 50,
                prior: bdd_channel,
                n: 4000,
                m: 5000,
                matrix: MatrixKind::Toeplitz,
                sigma_z: vec![1.0, 0.1, 0.01],
                sigma_hat: SiSpec::Chained,
                batches: 5,
                amp: AmpSettings {
                    iterations: 200,
                    damping: 0.9,
                    ..base.amp
                },
                normalization: Normalization::PerEntry,
                ..base
            },
            ExperimentKind::Phase => Self {
                prior: PriorSpec::Bdd {
                    eps: [0.80, 0.01, 0.18, 0.01],
                    sigma_s: 1.0,
                    rho: 0.95,
                },
                sigma_z: vec![0.01],
                sigma_hat: SiSpec::Chained,
                se: SeSettings {
                    mc: 20_000,
                    tol: 1e-6,
                    ..base.se
                },
                ..base
            },
            ExperimentKind::Se => Self {
                sigma_hat: SiSpec::Gaussian(0.1),
                ..base
            },
        }
    }

    /// Preset, then the file (if any), then flag overrides, then validation.
    pub fn resolve(kind: ExperimentKind, file: Option<&Path>, overrides: &RawConfig) -> Result<Self, CliError> {
        let mut cfg = Self::preset(kind);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let raw: RawConfig =
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
            cfg.apply(&raw)?;
        }
        cfg.apply(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, raw: &RawConfig) -> Result<(), CliError> {
        let e = &raw.experiment;
        set(&mut self.seed, e.seed);
        set(&mut self.trials, e.trials);
        set(&mut self.workers, e.workers);

        let p = &raw.prior;
        if let Some(family) = p.family.as_deref() {
            self.prior = match family {
                "bg" => PriorSpec::Bg { epsilon: 0.3 },
                "gg" => PriorSpec::Gg { sigma_x_sq: 1.0 },
                "bdd" => match self.prior {
                    bdd @ PriorSpec::Bdd { .. } => bdd,
                    _ => PriorSpec::Bdd {
                        eps: [0.80, 0.01, 0.18, 0.01],
                        sigma_s: 1.0,
                        rho: 0.95,
                    },
                },
                other => return Err(CliError::Usage(format!("unknown prior family `{other}`"))),
            };
        }
        match &mut self.prior {
            PriorSpec::Bg { epsilon } => set(epsilon, p.epsilon),
            PriorSpec::Bdd { eps, sigma_s, rho } => {
                set(eps, p.eps);
                set(sigma_s, p.sigma_s);
                set(rho, p.rho);
            }
            PriorSpec::Gg { sigma_x_sq } => set(sigma_x_sq, p.sigma_x_sq),
        }

        let q = &raw.problem;
        set(&mut self.n, q.n);
        set(&mut self.m, q.m);
        set(&mut self.pilot_len, q.pilot_len);
        set(&mut self.matrix, q.matrix);
        if let Some(sz) = &q.sigma_z {
            self.sigma_z = sz.clone();
        }
        if let Some(si) = &q.sigma_hat {
            self.sigma_hat = match si {
                SiValue::Level(v) => SiSpec::Gaussian(*v),
                SiValue::Word(w) if w == "chained" => SiSpec::Chained,
                SiValue::Word(w) => return Err(CliError::Usage(format!("sigma_hat must be a number or \"chained\", got `{w}`"))),
            };
        }
        set(&mut self.batches, q.batches);

        let a = &raw.amp;
        set(&mut self.amp.iterations, a.iterations);
        set(&mut self.amp.damping, a.damping);
        set(&mut self.amp.convergence_tol, a.convergence_tol);
        set(&mut self.amp.lambda, a.lambda);

        let s = &raw.se;
        set(&mut self.se.mc, s.mc);
        set(&mut self.se.t_max, s.t_max);
        set(&mut self.se.tol, s.tol);
        set(&mut self.se.seed, s.seed);

        let ph = &raw.phase;
        if let Some(d) = &ph.deltas {
            self.phase.deltas = d.clone();
        }
        if let Some(g) = &ph.gammas {
            self.phase.gammas = g.clone();
        }
        if let Some(r) = &ph.report {
            self.phase.report = r.clone();
        }

        let o = &raw.output;
        if let Some(dir) = &o.dir {
            self.out_dir = dir.clone();
        }
        set(&mut self.normalization, o.normalization);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Usage(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.n == 0 || self.m == 0 || self.pilot_len == 0 {
            return bad("n, m and pilot_len must be positive");
        }
        if self.batches == 0 {
            return bad("batches must be at least 1");
        }
        if self.sigma_z.is_empty() || self.sigma_z.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("sigma_z must be a non-empty list of finite non-negative values");
        }
        if let SiSpec::Gaussian(s) = self.sigma_hat {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma_hat must be positive and finite");
            }
        }
        if self.amp.iterations == 0 || !(0.0..1.0).contains(&self.amp.damping) {
            return bad("amp.iterations must be positive and amp.damping in [0, 1)");
        }
        if self.se.mc < ampsi_core::se::MIN_MC_SAMPLES || self.se.t_max == 0 {
            return bad("se.mc must be at least 1000 and se.t_max positive");
        }
        if self.phase.deltas.is_empty() || self.phase.gammas.is_empty() || self.phase.report.is_empty() {
            return bad("phase grids and report batches must be non-empty");
        }
        self.prior.model().map_err(|e| CliError::Usage(format!("prior: {e}")))?;
        let needs = |ok: bool, msg: &str| if ok { Ok(()) } else { bad(msg) };
        let family_ok = match self.kind {
            ExperimentKind::Fig4 => !matches!(self.prior, PriorSpec::Bdd { .. }),
            ExperimentKind::Se => true,
            ExperimentKind::Fig5 | ExperimentKind::Channel | ExperimentKind::Table2 | ExperimentKind::Phase => {
                matches!(self.prior, PriorSpec::Bdd { .. })
            }
        };
        needs(family_ok, "prior family does not fit this experiment")?;
        if self.kind == ExperimentKind::Fig4 {
            needs(matches!(self.sigma_hat, SiSpec::Gaussian(_)), "this experiment needs a numeric sigma_hat")?;
        }
        if self.amp.lambda == LambdaChoice::Se && self.kind != ExperimentKind::Fig4 {
            return bad("amp.lambda = \"se\" is only supported by fig4");
        }
        if self.kind == ExperimentKind::Fig5 {
            needs(self.batches >= 2, "fig5 needs at least 2 batches")?;
        }
        if self.kind == ExperimentKind::Phase && self.phase.report.contains(&0) {
            return bad("phase report batches are 1-based");
        }
        Ok(())
    }

    /// Rows of the measurement matrix for the configured matrix kind.
    pub fn rows(&self) -> usize {
        match self.matrix {
            MatrixKind::Dense => self.m,
            MatrixKind::Toeplitz => self.pilot_len + self.n - 1,
        }
    }

    pub fn delta(&self) -> f64 {
        self.rows() as f64 / self.n as f64
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Partial configuration as read from a file or assembled from flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: RawExperiment,
    pub prior: RawPrior,
    pub problem: RawProblem,
    pub amp: RawAmp,
    pub se: RawSe,
    pub phase: RawPhase,
    pub output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawExperiment {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawPrior {
    pub family: Option<String>,
    pub epsilon: Option<f64>,
    pub eps: Option<[f64; 4]>,
    pub sigma_s: Option<f64>,
    pub rho: Option<f64>,
    pub sigma_x_sq: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SiValue {
    Level(f64),
    Word(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawProblem {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub pilot_len: Option<usize>,
    pub matrix: Option<MatrixKind>,
    pub sigma_z: Option<Vec<f64>>,
    pub sigma_hat: Option<SiValue>,
    pub batches: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawAmp {
    pub iterations: Option<usize>,
    pub damping: Option<f64>,
    pub convergence_tol: Option<f64>,
    pub lambda: Option<LambdaChoice>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawSe {
    pub mc: Option<usize>,
    pub t_max: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawPhase {
    pub deltas: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
    pub report: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
    pub normalization: Option<Normalization>,
}
