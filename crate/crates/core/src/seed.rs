//! Seed derivation.
//!
//! Every stochastic step of a run draws from its own stream, keyed by a
//! purpose label and a counter. Adding or removing an unlearning method
//! never shifts the stream used to build the deletion plan or to train the
//! original model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Sub-seed for `(seed, purpose, counter)`.
pub fn derive(seed: u64, purpose: &str, counter: u64) -> u64 {
    mix64(mix64(seed ^ fnv1a(purpose)).wrapping_add(mix64(counter)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `stream` of `seed`; used where a draw must be
/// reproducible per position (for example per parameterized layer).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
