//! Seeding discipline.
//!
//! Every random draw comes from a ChaCha8 generator keyed by a run-level seed
//! and a 64-bit stream index. Replication `r`, arm `i` uses stream
//! [`stream_id`]`(r, i)`, so a replication's draws never depend on how
//! replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Arms per replication reserved in the stream index space.
pub const ARM_SLOTS: u64 = 1 << 16;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn stream_id(replication: u64, arm: usize) -> u64 {
    debug_assert!((arm as u64) < ARM_SLOTS);
    replication * ARM_SLOTS + arm as u64
}
