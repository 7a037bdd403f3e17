//! Seeded random streams.
//!
//! Every random quantity in the crate (coupling tables, Haar-random states)
//! is drawn from a ChaCha stream keyed by a 64-bit seed, so a run is
//! reproducible bit for bit on any platform. Sweep seeds are derived with
//! [`derive_seed`], which mixes a master seed with the sweep-point and
//! realization indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type SeededRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for realization `realization` of sweep point `point`.
///
/// Adding points or realizations to a sweep never changes the seeds of the
/// existing ones.
pub fn derive_seed(master: u64, point: u64, realization: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ point.wrapping_mul(0xd6e8_feb8_6659_fd93));
    splitmix64(b ^ realization.wrapping_mul(0xa076_1d64_78bd_642f))
}

/// Pair of independent standard normal deviates by the Box-Muller method.
///
/// `r0` is mapped to `(0, 1]` so the logarithm stays finite.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let r0: f64 = 1.0 - rng.random::<f64>();
    let r1: f64 = rng.random::<f64>();
    let radius = (-2.0 * r0.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * r1;
    (radius * angle.cos(), radius * angle.sin())
}
