//! Seedable random streams.
//!
//! Every run draws from its own ChaCha8 stream: the seed selects the key and
//! the stream id separates consumers that share a seed (parameter init,
//! collocation batches, observations).

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rng = ChaCha8Rng;

pub mod streams {
    pub const INIT: u64 = 1;
    pub const BATCH: u64 = 2;
    pub const OBSERVATIONS: u64 = 3;
    pub const MONTE_CARLO: u64 = 4;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Normal variate with mean zero and the given standard deviation.
pub fn normal(rng: &mut Rng, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * std
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
