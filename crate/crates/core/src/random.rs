//! Complex Gaussian draws and reproducible random-stream derivation.
//!
//! Every random quantity in a simulation is drawn from a ChaCha20 stream
//! identified by `(seed, stream id)`. Stream ids are derived from structured
//! labels, so draws for one realization never depend on how many draws were
//! made for another, or on the order in which they run.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::{CVec, C64};

/// One draw of `CN(0, 1)`: real and imaginary parts are `N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A vector of i.i.d. `CN(0, 1)` entries.
pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

/// What a stream is used for inside one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Channel,
    Hybrid,
    Digital,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Channel => 0,
            Purpose::Hybrid => 1,
            Purpose::Digital => 2,
        }
    }
}

/// The seed of realization `r` under `master_seed`.
///
/// Realization seeds do not depend on the sweep point, so all points of a
/// sweep see the same channel draws whenever their dimensions agree
/// (common random numbers for paired comparisons).
pub fn realization_seed(master_seed: u64, realization: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(realization as u64);
    rng.next_u64()
}

/// The stream for `purpose` at `sweep_point` of the realization with `seed`.
///
/// Channels ignore the sweep point (see [`realization_seed`]); algorithm
/// streams are separate per point so that each point is independently
/// reproducible.
pub fn stream(seed: u64, sweep_point: usize, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let point = match purpose {
        Purpose::Channel => 0,
        _ => sweep_point as u64 + 1,
    };
    rng.set_stream((point << 8) | purpose.code());
    rng
}
