//! Named sub-seeds fanned out from one root seed.
//!
//! `derive_seed(root, "init/learner/3")` is a pure function of its inputs, so
//! any component can be rerun in isolation with the same stream it saw in the
//! full pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn derive_seed(root: u64, name: &str) -> u64 {
    splitmix64(splitmix64(root) ^ fnv1a(name))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(root: u64, name: &str) -> Rng {
    rng_from(derive_seed(root, name))
}
