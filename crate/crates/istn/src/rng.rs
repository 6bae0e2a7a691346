use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Derives independent, reproducible RNGs from one root seed.
///
/// Every consumer of randomness (weight init, shuffling, per-image
/// perturbations, dropout, soft labels) pulls its own ChaCha stream keyed by
/// `(seed, stream id)`, so adding a consumer never perturbs the draws seen by
/// the others and per-item streams can be opened independently of processing
/// order.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SeedStream {
    pub seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// Stream for item `index` within a namespaced family of streams.
    pub fn item_rng(&self, family: u64, index: u64) -> ChaCha8Rng {
        // Families are spaced far apart; indexes stay well below the spacing.
        self.rng(family.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index))
    }
}

/// Serializable RNG position, used to checkpoint and resume training streams
/// bit-identically.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::from_seed(self.seed);
        r.set_stream(self.stream);
        r.set_word_pos(self.word_pos);
        r
    }
}

/// Deterministic Fisher-Yates shuffle of indices `0..n`.
pub fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::RngExt;
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
