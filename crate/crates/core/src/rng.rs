//! Counter-based random substreams.
//!
//! Every shot draws from its own ChaCha stream selected by the shot index, so
//! a run gives the same records whatever the thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream for shot `index` of a run seeded with `master_seed`.
pub fn shot_rng(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent master seed for a labelled sub-run (a sweep point,
/// a bootstrap) from a parent seed.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    mix64(parent ^ mix64(label))
}
