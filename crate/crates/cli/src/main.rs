use std::path::PathBuf;
use std::process::ExitCode;

use ampsi::config::{ExperimentConfig, ExperimentKind, LambdaChoice, MatrixKind, Normalization, RawConfig, SiValue};
use ampsi::{golden, CliError};
use clap::{Args, Parser, Subcommand};

/// Experiments for approximate message passing with side information.
#[derive(Debug, Parser)]
#[command(name = "ampsi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single-batch AMP-SI with Gaussian SI against state evolution.
    Fig4(RunArgs),
    /// Multi-batch BDD recovery: plain AMP against chained AMP-SI.
    Fig5(RunArgs),
    /// Channel estimation with Toeplitz pilot matrices.
    Channel(RunArgs),
    /// Final-batch i.i.d., SE and Toeplitz comparison.
    Table2(RunArgs),
    /// State-evolution phase grid over measurement and sparsity rates.
    Phase(RunArgs),
    /// State-evolution trajectory.
    Se(RunArgs),
    /// Regenerates the denoiser golden file and verifies it.
    OracleCheck {
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Rewrite the golden file instead of comparing against it.
        #[arg(long)]
        update: bool,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML config; missing keys use the full-scale preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    pilot_len: Option<usize>,
    #[arg(long, value_parser = parse_matrix)]
    matrix: Option<MatrixKind>,
    /// Comma-separated noise standard deviations.
    #[arg(long, value_delimiter = ',')]
    sigma_z: Option<Vec<f64>>,
    /// SI noise standard deviation, or `chained`.
    #[arg(long)]
    sigma_hat: Option<String>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    /// `empirical` or `se`.
    #[arg(long, value_parser = parse_lambda)]
    lambda: Option<LambdaChoice>,
    #[arg(long)]
    se_mc: Option<usize>,
    #[arg(long)]
    se_seed: Option<u64>,
    /// `per-entry` or `per-energy`.
    #[arg(long)]
    normalization: Option<Normalization>,
    /// Output directory; defaults to $AMPSI_OUT_DIR or ./out.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_matrix(s: &str) -> Result<MatrixKind, String> {
    match s {
        "dense" => Ok(MatrixKind::Dense),
        "toeplitz" => Ok(MatrixKind::Toeplitz),
        _ => Err(format!("unknown matrix `{s}` (dense, toeplitz)")),
    }
}

fn parse_lambda(s: &str) -> Result<LambdaChoice, String> {
    match s {
        "empirical" => Ok(LambdaChoice::Empirical),
        "se" => Ok(LambdaChoice::Se),
        _ => Err(format!("unknown lambda mode `{s}` (empirical, se)")),
    }
}

impl RunArgs {
    fn overrides(&self) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        raw.experiment.trials = self.trials;
        raw.experiment.seed = self.seed;
        raw.experiment.workers = self.workers;
        raw.problem.n = self.n;
        raw.problem.m = self.m;
        raw.problem.pilot_len = self.pilot_len;
        raw.problem.matrix = self.matrix;
        raw.problem.sigma_z = self.sigma_z.clone();
        raw.problem.sigma_hat = match self.sigma_hat.as_deref() {
            None => None,
            Some("chained") => Some(SiValue::Word("chained".into())),
            Some(v) => Some(SiValue::Level(
                v.parse().map_err(|_| CliError::Usage(format!("bad --sigma-hat `{v}`")))?,
            )),
        };
        raw.problem.batches = self.batches;
        raw.amp.iterations = self.iterations;
        raw.amp.damping = self.damping;
        raw.amp.lambda = self.lambda;
        raw.se.mc = self.se_mc;
        raw.se.seed = self.se_seed;
        raw.output.dir = self.out.clone();
        raw.output.normalization = self.normalization;
        Ok(raw)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (kind, args) = match cli.command {
        Command::Fig4(a) => (ExperimentKind::Fig4, a),
        Command::Fig5(a) => (ExperimentKind::Fig5, a),
        Command::Channel(a) => (ExperimentKind::Channel, a),
        Command::Table2(a) => (ExperimentKind::Table2, a),
        Command::Phase(a) => (ExperimentKind::Phase, a),
        Command::Se(a) => (ExperimentKind::Se, a),
        Command::OracleCheck { golden: path, update } => {
            let path = path.unwrap_or_else(golden::default_path);
            let rows = golden::oracle_check(&path, update)?;
            let verb = if update { "wrote" } else { "verified" };
            println!("{verb} {rows} rows in {}", path.display());
            return Ok(());
        }
    };
    let cfg = ExperimentConfig::resolve(kind, args.config.as_deref(), &args.overrides()?)?;
    let manifest = ampsi::run(&cfg)?;
    let text = std::fs::read_to_string(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ampsi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
