//! Named, seekable random substreams.
//!
//! Every stochastic stage draws from its own ChaCha stream, addressed by
//! `(master seed, stage, shard)`. Stages never share draws, and a shard's
//! draws do not depend on how many shards run before it or on which thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The stochastic stages of the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Stage {
    Generation = 1,
    Attenuation = 2,
    Conversion = 3,
    Detection = 4,
    PhaseEnsemble = 5,
}

const SHARD_BITS: u32 = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Substream {
    seed: u64,
    stage: Stage,
}

impl Substream {
    pub fn new(seed: u64, stage: Stage) -> Self {
        Self { seed, stage }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for one shard of this stage.
    pub fn shard(&self, index: u64) -> ChaCha8Rng {
        debug_assert!(index < 1 << SHARD_BITS);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.stage as u64) << SHARD_BITS) | index);
        rng
    }

    pub fn rng(&self) -> ChaCha8Rng {
        self.shard(0)
    }
}
