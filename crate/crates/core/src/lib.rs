//! Approximate message passing with side information (AMP-SI).
//!
//! The crate is `no_std` compatible (it needs `alloc`). Everything here is
//! pure computation over explicit seeds: signal and side-information
//! generators, scalar Gaussian identities, closed-form conditional MMSE
//! denoisers, measurement operators, the AMP / AMP-SI iterations, Monte-Carlo
//! state evolution, and brute-force posterior oracles used to validate the
//! closed forms.
//!
//! File formats, the command-line driver and the multi-batch experiments live
//! in the `ampsi` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::too_many_arguments)]
// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod amp;
pub mod denoise;
mod error;
pub mod gaussian;
pub mod measurement;
pub mod models;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod se;
pub mod stats;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use amp::{AmpConfig, AmpOutcome, IterationRecord, LambdaMode, SideInfo};
pub use denoise::{Denoiser, DenoiserContext};
pub use measurement::{MeasurementOperator, Measurements};
pub use models::{BddPrior, BgPrior, GgPrior, PriorModel, SiChannel, SignalPair};
pub use se::{EffectiveChannel, SeEstimate, SeTrace};
