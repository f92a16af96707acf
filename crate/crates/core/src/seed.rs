//! Reproducible random streams.
//!
//! Every piece of randomness is addressed by a `(master, stream)` pair and fed
//! to ChaCha8, a counter-based generator, so a replication's draws depend only
//! on its index and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Address of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
    pub stream: u64,
}

impl Seed {
    pub const fn new(master: u64) -> Self {
        Seed { master, stream: 0 }
    }

    pub const fn with_stream(master: u64, stream: u64) -> Self {
        Seed { master, stream }
    }

    /// Child seed for sub-task `index`. Children of distinct parents or
    /// distinct indices never share a stream.
    pub fn derive(&self, index: u64) -> Seed {
        Seed {
            master: splitmix64(self.master ^ splitmix64(self.stream.wrapping_add(0x9E37_79B9))),
            stream: index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for Seed {
    fn from(master: u64) -> Self {
        Seed::new(master)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
