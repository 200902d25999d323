//! Counter-based noise substreams.
//!
//! Every logical draw site (a particle at a step, a replica, a Monte-Carlo
//! path) gets its own generator keyed by the master seed and a path of
//! integer ids. Generators are created on demand from the key alone, so the
//! schedule that executes the draws — one thread or many — cannot change any
//! result. Picard iterations reuse a path key to share Brownian increments
//! across iterations (common random numbers).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream-kind tags, the first component of every substream path.
pub mod stream {
    pub const INIT: u64 = 0x01;
    pub const STEP: u64 = 0x02;
    pub const REPLICA: u64 = 0x03;
    pub const PICARD_INIT: u64 = 0x04;
    pub const PICARD_NOISE: u64 = 0x05;
    pub const SLICED: u64 = 0x06;
    pub const PROBE: u64 = 0x07;
    pub const MC_PATH: u64 = 0x08;
    pub const ASSUMPTION: u64 = 0x09;
}

const SALT: u64 = 0x6A09_E667_F3BC_C908;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold one id into a seed, keyed-hash style.
#[inline]
pub fn fold(seed: u64, id: u64) -> u64 {
    splitmix64(seed ^ splitmix64(id ^ SALT))
}

/// Derive a child seed from a master seed and a path of ids.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(master ^ SALT);
    for &id in path {
        s = fold(s, id);
    }
    s
}

/// Fresh generator for the given substream path.
pub fn substream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Fill `out` with i.i.d. standard normals drawn from `rng`.
pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Fill `out` with i.i.d. uniforms on `[lo, hi)`.
pub fn fill_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64, out: &mut [f64]) {
    use rand::Rng;
    for v in out.iter_mut() {
        *v = rng.gen_range(lo..hi);
    }
}
