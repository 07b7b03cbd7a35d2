//! Counter-based seeding. Every random stream in the crate is derived from a
//! user seed plus a key, so results do not depend on evaluation order or on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of key words into a new 64-bit seed.
pub fn derive(seed: u64, key: &[u64]) -> u64 {
    let mut h = splitmix(seed);
    for (i, &k) in key.iter().enumerate() {
        h = splitmix(h ^ splitmix(k.wrapping_add(i as u64).wrapping_mul(GOLDEN)));
    }
    // length disambiguates trailing zero words
    splitmix(h ^ key.len() as u64)
}

pub fn rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, key))
}

/// Domain tags keep streams for different purposes apart.
pub(crate) mod tag {
    pub const MARGINAL: u64 = 0x6d61_7267;
    pub const PERMUTATION: u64 = 0x7065_726d;
    pub const DRAW: u64 = 0x6472_6177;
}
