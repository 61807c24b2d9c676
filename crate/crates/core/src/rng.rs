//! Counter-based random streams.
//!
//! Every consumer of randomness derives its generator from
//! `(master seed, stream id, index)`. The index selects a ChaCha stream, so
//! trial `t` sees the same numbers no matter which worker runs it or in which
//! order trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Identifies the consumer of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId(pub u64);

impl StreamId {
    pub const SAMPLER: StreamId = StreamId(0x01);
    pub const BURN_IN: StreamId = StreamId(0x02);
    pub const DISTORTION: StreamId = StreamId(0x03);
    pub const CERTIFY: StreamId = StreamId(0x04);
    pub const CONCENTRATION: StreamId = StreamId(0x10);
    pub const BOOTSTRAP: StreamId = StreamId(0x11);
    pub const ASCLT: StreamId = StreamId(0x20);
    pub const KDE: StreamId = StreamId(0x21);
    pub const EMPIRICAL: StreamId = StreamId(0x22);
    pub const PERIODOGRAM: StreamId = StreamId(0x23);
    pub const SHADOWING: StreamId = StreamId(0x24);
    pub const CLT: StreamId = StreamId(0x25);
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `(seed, id, index)`.
pub fn stream(seed: u64, id: StreamId, index: u64) -> StreamRng {
    let key = splitmix64(seed ^ splitmix64(id.0));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Derive a child seed, e.g. one per parameter cell of an experiment grid.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt.wrapping_add(0xA5A5_A5A5)))
}
