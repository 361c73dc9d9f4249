//! Keyed random streams.
//!
//! Every pixel gets its own ChaCha stream derived from the render seed, a
//! per-light salt and the sampling strategy, so results do not depend on how
//! pixels are scheduled across threads and disabling one light leaves the
//! samples of the others untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Area = 1,
    Angular = 2,
    Shadow = 3,
    Gather = 4,
    Surface = 5,
}

/// FNV-1a hash, used to salt streams with light ids.
pub fn salt(id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn pixel_rng(seed: u64, salt: u64, stream: Stream, pixel: usize) -> ChaCha8Rng {
    let key = mix(seed ^ mix(salt ^ mix(stream as u64)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(pixel as u64);
    rng
}

/// Uniform in `[-1, 1)`.
#[inline]
pub fn signed(rng: &mut impl Rng) -> f64 {
    rng.gen::<f64>() * 2.0 - 1.0
}
