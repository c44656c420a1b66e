//! Randomness sources.
//!
//! Production paths draw from system entropy. Seeded mode exists for tests
//! and reproducible corpora; it derives independent ChaCha20 streams so that
//! per-item randomness does not depend on iteration or thread order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Where randomness comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Randomness {
    /// System entropy; every stream is fresh and unpredictable.
    System,
    /// Deterministic test mode: streams are a pure function of (seed, stream id).
    Seeded(u64),
}

impl Randomness {
    /// An independent RNG for the given stream id.
    ///
    /// Under `Seeded`, equal (seed, id) pairs always yield identical streams,
    /// which keeps bulk operations deterministic even when work is split
    /// across threads. Under `System` the id is ignored.
    pub fn stream(&self, id: u64) -> ChaCha20Rng {
        match self {
            Randomness::System => ChaCha20Rng::from_entropy(),
            Randomness::Seeded(seed) => {
                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                rng.set_stream(id);
                rng
            }
        }
    }

    pub fn is_seeded(&self) -> bool {
        matches!(self, Randomness::Seeded(_))
    }
}
