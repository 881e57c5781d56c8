//! Measurement operators `y = A x + z`.
//!
//! Two kinds are provided: a dense matrix with i.i.d. `N(0, 1/M)` entries and
//! the Toeplitz matrix of a pilot sequence, whose action is the full linear
//! convolution `conv(p, x)` with `M = len(p) + N − 1` rows.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::stats::{axpy, dot};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzOperator {
    pilot: Vec<f64>,
    cols: usize,
}

impl ToeplitzOperator {
    pub fn new(pilot: Vec<f64>, cols: usize) -> Result<Self> {
        if pilot.is_empty() {
            return Err(invalid("pilot", "must be non-empty"));
        }
        if cols == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        Ok(Self { pilot, cols })
    }

    pub fn pilot(&self) -> &[f64] {
        &self.pilot
    }

    /// Materialises the `M × N` Toeplitz matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        let rows = self.pilot.len() + self.cols - 1;
        let mut data = vec![0.0; rows * self.cols];
        for j in 0..self.cols {
            for (k, &p) in self.pilot.iter().enumerate() {
                data[(j + k) * self.cols + j] = p;
            }
        }
        DenseMatrix {
            rows,
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOperator {
    Dense(DenseMatrix),
    Toeplitz(ToeplitzOperator),
}

impl MeasurementOperator {
    pub fn rows(&self) -> usize {
        match self {
            MeasurementOperator::Dense(d) => d.rows,
            MeasurementOperator::Toeplitz(t) => t.pilot.len() + t.cols - 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MeasurementOperator::Dense(d) => d.cols,
            MeasurementOperator::Toeplitz(t) => t.cols,
        }
    }

    /// Measurement rate `δ = M / N`.
    pub fn delta(&self) -> f64 {
        self.rows() as f64 / self.cols() as f64
    }

    pub fn is_toeplitz(&self) -> bool {
        matches!(self, MeasurementOperator::Toeplitz(_))
    }

    fn check(expected: usize, actual: usize) -> Result<()> {
        if expected != actual {
            Err(Error::DimensionMismatch { expected, actual })
        } else {
            Ok(())
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// `Aᵀ r`.
    pub fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols()];
        self.apply_adjoint_into(r, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        Self::check(self.cols(), x.len())?;
        Self::check(self.rows(), out.len())?;
        match self {
            MeasurementOperator::Dense(d) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = dot(d.row(i), x);
                }
            }
            MeasurementOperator::Toeplitz(t) => {
                out.fill(0.0);
                let l = t.pilot.len();
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        axpy(xj, &t.pilot, &mut out[j..j + l]);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_adjoint_into(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        Self::check(self.rows(), r.len())?;
        Self::check(self.cols(), out.len())?;
        match self {
            MeasurementOperator::Dense(d) => {
                out.fill(0.0);
                for (i, &ri) in r.iter().enumerate() {
                    axpy(ri, d.row(i), out);
                }
            }
            MeasurementOperator::Toeplitz(t) => {
                let l = t.pilot.len();
                for (j, o) in out.iter_mut().enumerate() {
                    *o = dot(&t.pilot, &r[j..j + l]);
                }
            }
        }
        Ok(())
    }
}

/// Dense operator with i.i.d. `N(0, 1/M)` entries, filled row by row.
pub fn make_dense(m: usize, n: usize, seed: u64) -> Result<MeasurementOperator> {
    if m == 0 || n == 0 {
        return Err(invalid("dimensions", "m and n must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let data = (0..m * n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            scale * g
        })
        .collect();
    Ok(MeasurementOperator::Dense(DenseMatrix {
        rows: m,
        cols: n,
        data,
    }))
}

/// Toeplitz operator of a random pilot with entries `±1/√pilot_len`.
pub fn make_toeplitz(pilot_len: usize, n: usize, seed: u64) -> Result<MeasurementOperator> {
    if pilot_len == 0 || n == 0 {
        return Err(invalid("dimensions", "pilot length and n must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let amp = 1.0 / (pilot_len as f64).sqrt();
    let pilot = (0..pilot_len)
        .map(|_| if rng.random_bool(0.5) { amp } else { -amp })
        .collect();
    Ok(MeasurementOperator::Toeplitz(ToeplitzOperator::new(pilot, n)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub y: Vec<f64>,
    pub sigma_z: f64,
}

/// `y = A x + N(0, σ_z²)`.
pub fn measure(op: &MeasurementOperator, x: &[f64], sigma_z: f64, seed: u64) -> Result<Measurements> {
    if !(sigma_z >= 0.0) || !sigma_z.is_finite() {
        return Err(invalid("sigma_z", "must be non-negative and finite"));
    }
    let mut y = op.apply(x)?;
    if sigma_z > 0.0 {
        let mut rng = rng_from_seed(seed);
        for yi in &mut y {
            let g: f64 = StandardNormal.sample(&mut rng);
            *yi += sigma_z * g;
        }
    }
    Ok(Measurements { y, sigma_z })
}
