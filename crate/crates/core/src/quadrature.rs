//! Globally adaptive Gauss–Kronrod (7, 15) quadrature on finite intervals.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below `max(abs_tol, rel_tol·|I|)`.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use crate::error::{invalid, Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Piece {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let s = f(centre - dx) + f(centre + dx);
        kronrod += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let diff = ((kronrod - gauss) * half).abs();
    // QUADPACK-style pessimistic scaling of |K − G|.
    let error = if diff == 0.0 {
        0.0
    } else {
        let scaled = (200.0 * diff / value.abs().max(f64::MIN_POSITIVE)).powf(1.5) * value.abs();
        scaled.min(diff).max(50.0 * f64::EPSILON * value.abs())
    };
    Piece {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrates `f` over `[lo, hi]`, starting from the partition given by the
/// sorted interior `breakpoints`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    opts: QuadratureOptions,
) -> Result<QuadratureResult> {
    if !(lo.is_finite() && hi.is_finite()) || !(hi > lo) {
        return Err(invalid("interval", "must be finite with hi > lo"));
    }
    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(lo);
    for &p in breakpoints {
        if p > *edges.last().unwrap() && p < hi {
            edges.push(p);
        }
    }
    edges.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let p = gk15(&mut f, w[0], w[1]);
        evaluations += 15;
        total += p.value;
        err += p.error;
        heap.push(p);
    }
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                evaluations,
                error_estimate: err,
            });
        }
        let worst = heap.pop().expect("heap holds every piece");
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = gk15(&mut f, worst.lo, mid);
        let right = gk15(&mut f, mid, worst.hi);
        evaluations += 30;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !total.is_finite() {
            return Err(Error::Quadrature {
                evaluations,
                error_estimate: f64::INFINITY,
            });
        }
    }
    // Re-sum to shed the drift of the running updates.
    let (value, error_estimate) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations,
    })
}

/// Iterated 2-D integral `∫∫ f(x, y) dy dx` over a rectangle.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    x_range: (f64, f64),
    y_range: (f64, f64),
    opts: QuadratureOptions,
) -> Result<QuadratureResult> {
    let mut inner_err = 0.0;
    let mut evaluations = 0;
    let mut failure = None;
    let outer = integrate(
        |x| {
            match integrate(|y| f(x, y), y_range.0, y_range.1, &[], opts) {
                Ok(r) => {
                    inner_err += r.error_estimate;
                    evaluations += r.evaluations;
                    r.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        x_range.0,
        x_range.1,
        &[],
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(QuadratureResult {
        value: outer.value,
        error_estimate: outer.error_estimate,
        evaluations: evaluations + outer.evaluations,
    })
}
