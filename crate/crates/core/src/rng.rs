//! Counter-based random streams.
//!
//! Splitting rule: path `p` of a run with master seed `s` owns the ChaCha8 key
//! derived from `splitmix64(s ^ splitmix64(p))`; within that key, stream id `m`
//! (a mode or noise-column group) selects an independent ChaCha counter space.
//! A draw therefore depends only on `(s, p, m, position)`, never on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn stream(seed: u64, path: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(path)));
    rng.set_stream(id);
    rng
}

#[inline]
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
