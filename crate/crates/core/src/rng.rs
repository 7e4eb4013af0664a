//! Seed and stream derivation. All randomness in the crate flows through
//! ChaCha8 generators built here so that runs replay exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root generator for a run.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for one unit of parallel work. Streams never
/// collide for distinct ids, so tallies accumulated across threads match
/// the sequential order exactly.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut r = seeded(seed);
    r.set_stream(stream_id);
    r
}

/// Index drawn proportionally to `probs` (a normalized vector) using one
/// uniform variate; rounding slack falls on the last index.
pub fn sample_categorical(probs: &[f64], rng: &mut impl rand::Rng) -> usize {
    debug_assert!(!probs.is_empty());
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
