//! Seeded, position-serializable random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Derives an independent child seed from a parent seed and a stream label.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    // splitmix64 finaliser over the combined input
    let mut z = master ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A ChaCha8 stream that serializes as its seed plus word position, so a
/// restored stream continues exactly where the original stopped.
#[derive(Debug, Clone)]
pub struct StreamRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl PartialEq for StreamRng {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.word_pos() == other.word_pos()
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[derive(Serialize, Deserialize)]
struct StreamPosition {
    seed: u64,
    // decimal string: JSON numbers cannot carry u128 portably
    word_pos: String,
}

impl Serialize for StreamRng {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StreamPosition {
            seed: self.seed,
            word_pos: self.word_pos().to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StreamRng {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pos = StreamPosition::deserialize(d)?;
        let word_pos: u128 = pos.word_pos.parse().map_err(serde::de::Error::custom)?;
        let mut rng = StreamRng::new(pos.seed);
        rng.inner.set_word_pos(word_pos);
        Ok(rng)
    }
}
