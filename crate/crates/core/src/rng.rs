//! Per-replica random streams.
//!
//! Every replica draws from its own ChaCha8 stream, keyed by the master seed
//! and selected by a 64-bit stream id. Results therefore do not depend on
//! which thread ran which replica.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

pub type Rng = ChaCha8Rng;

/// Stream id for `replica` inside experiment cell `cell` (e.g. an index into
/// the list of system sizes or query points).
#[inline]
pub fn stream_id(cell: u32, replica: u32) -> u64 {
    (u64::from(cell) << 32) | u64::from(replica)
}

/// Independent generator for `(master, stream)`.
pub fn replica_rng(master: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}
