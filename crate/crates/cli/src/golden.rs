//! Golden file of closed-form denoiser values next to their quadrature
//! oracle values.

use std::path::{Path, PathBuf};

use ampsi_core::denoise::{eta_bg, eta_gg};
use ampsi_core::models::{BgPrior, GgPrior};
use ampsi_core::oracle::oracle_posterior_mean_quadrature;
use ampsi_core::PriorModel;

use crate::output::{write_atomic, Cell, Table};
use crate::CliError;

pub const HEADER: [&str; 8] = ["prior", "param", "lambda_sq", "sigma_hat_sq", "a", "b", "eta_closed", "eta_oracle"];

/// Relative tolerance between the closed form and the oracle.
const ORACLE_REL: f64 = 1e-8;
/// Absolute tolerance near zero.
const ORACLE_ABS: f64 = 1e-10;
/// Allowed drift between a regenerated value and the stored one.
const GOLDEN_REL: f64 = 1e-12;

pub fn default_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("golden/denoiser_oracle.csv")
}

/// Regenerates the golden table.
pub fn generate() -> Result<Table, CliError> {
    let grid = [-3.0, -1.5, 0.0, 1.5, 3.0];
    let mut t = Table::new(&HEADER);
    let bg = BgPrior::new(0.3)?;
    let gg = GgPrior::new(2.0)?;
    for &(l, s) in &[(0.25, 0.01), (1.0, 0.5)] {
        for &a in &grid {
            for &b in &grid {
                let closed = eta_bg(bg, l, s, a, b);
                let oracle = oracle_posterior_mean_quadrature(PriorModel::Bg(bg), l, s, a, b)?;
                t.push(vec!["bg".into(), 0.3.into(), l.into(), s.into(), a.into(), b.into(), closed.into(), oracle.into()]);
            }
        }
    }
    for &(l, s) in &[(0.3, 0.05)] {
        for &a in &grid {
            for &b in &grid {
                let closed = eta_gg(gg, l, s, a, b);
                let oracle = oracle_posterior_mean_quadrature(PriorModel::Gg(gg), l, s, a, b)?;
                t.push(vec!["gg".into(), 2.0.into(), l.into(), s.into(), a.into(), b.into(), closed.into(), oracle.into()]);
            }
        }
    }
    Ok(t)
}

/// Closed form against oracle on every row.
pub fn check_table(t: &Table) -> Result<(), CliError> {
    for row in &t.rows {
        let (Cell::Num(c), Cell::Num(o)) = (&row[6], &row[7]) else {
            return Err(CliError::Check("malformed golden row".into()));
        };
        if (c - o).abs() > (ORACLE_REL * o.abs()).max(ORACLE_ABS) {
            return Err(CliError::Check(format!("closed form {c} vs oracle {o} in row {row:?}")));
        }
    }
    Ok(())
}

fn parse(text: &str) -> Result<Vec<Vec<String>>, CliError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Check("empty golden file".into()))?;
    if header != HEADER.join(",") {
        return Err(CliError::Check(format!("unexpected golden header `{header}`")));
    }
    Ok(lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

/// Compares a regenerated table with the stored file, cell by cell.
pub fn compare(stored: &str, fresh: &Table) -> Result<(), CliError> {
    let rows = parse(stored)?;
    if rows.len() != fresh.rows.len() {
        return Err(CliError::Check(format!("golden has {} rows, regenerated {}", rows.len(), fresh.rows.len())));
    }
    for (i, (old, new)) in rows.iter().zip(&fresh.rows).enumerate() {
        for (j, (o, n)) in old.iter().zip(new).enumerate() {
            let ok = match n {
                Cell::Text(s) => o == s,
                Cell::Int(v) => o.parse::<u64>().ok() == Some(*v),
                Cell::Num(v) => o
                    .parse::<f64>()
                    .map(|s| (s - v).abs() <= GOLDEN_REL * s.abs().max(v.abs()) + 1e-300)
                    .unwrap_or(false),
            };
            if !ok {
                return Err(CliError::Check(format!("golden row {} column {}: stored {o}, now {n:?}", i + 1, HEADER[j])));
            }
        }
    }
    Ok(())
}

/// Regenerates, verifies against the oracle, then either rewrites the file
/// (`update`) or checks it. Returns the number of rows.
pub fn oracle_check(path: &Path, update: bool) -> Result<usize, CliError> {
    let fresh = generate()?;
    check_table(&fresh)?;
    if update {
        write_atomic(path, fresh.to_csv().as_bytes())?;
    } else {
        let stored = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read golden file {}: {e}", path.display())))?;
        compare(&stored, &fresh)?;
    }
    Ok(fresh.rows.len())
}
