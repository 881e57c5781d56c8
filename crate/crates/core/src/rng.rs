//! Seed derivation.
//!
//! Every random quantity is drawn from its own ChaCha8 stream, derived from a
//! master seed and a path of integers. Experiments split streams in a fixed
//! order per trial and batch: signal, SI noise, matrix, measurement noise.
//! Keeping the streams independent means changing one component (say the
//! matrix size) never perturbs the signal realisation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers, in the documented splitting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Signal = 1,
    SiNoise = 2,
    Matrix = 3,
    MeasurementNoise = 4,
    StateEvolution = 5,
    Oracle = 6,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed for a named stream of a given trial and batch.
pub fn stream_seed(master: u64, trial: u64, batch: u64, stream: Stream) -> u64 {
    derive_seed(master, &[trial, batch, stream as u64])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
