//! Seeded random streams.
//!
//! Every repetition owns one seed. The seed feeds a ChaCha8 generator
//! (`rand_chacha` 0.9) and is split into independent streams by the ChaCha
//! stream counter, so adding draws to one stream never shifts another:
//!
//! | stream | id | consumers                                      |
//! |--------|----|------------------------------------------------|
//! | init   | 0  | derangement, network weights                   |
//! | train  | 1  | shuffles, states, decisions in learning events |
//! | eval   | 2  | frozen fitness evaluation                      |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Name and version of the generator, echoed into run manifests.
pub const GENERATOR: &str = "chacha8/rand_chacha-0.9/seed_from_u64";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Train = 1,
    Eval = 2,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
