//! Deterministic seed derivation and per-round random streams.
//!
//! Every random draw in a run is addressed by (entity seed, round). Streams
//! are independent of how many draws other entities made, so replaying any
//! sub-component (an agent, the tie breaker) reproduces its draws exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the splitmix64 generator; used as a seed mixer.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a base seed and a tag.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}

/// A seeded generator exposing an independent stream per round.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Positions the generator at the start of the given round's stream.
    pub fn at_round(&mut self, round: u64) -> &mut ChaCha8Rng {
        self.inner.set_stream(round);
        self.inner.set_word_pos(0);
        &mut self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn round_streams_are_independent_of_draw_history() {
        let mut a = StreamRng::new(42);
        let mut b = StreamRng::new(42);

        // Consume different amounts before visiting round 7.
        let _ = a.at_round(3).gen::<u64>();
        for _ in 0..10 {
            let _ = b.at_round(5).gen::<u64>();
        }

        let xa: u64 = a.at_round(7).gen();
        let xb: u64 = b.at_round(7).gen();
        assert_eq!(xa, xb);
    }

    #[test]
    fn derive_seed_changes_with_tag() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
