//! Seed handling.
//!
//! Every stochastic quantity in the library draws from a ChaCha substream
//! derived from one master seed and a purpose tag, so results do not depend
//! on call order or thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Each purpose gets an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Reservoir,
    Feedback,
    Basis,
    Angles,
    InitialState,
    ErrorInjection,
    TargetNoise,
}

impl Purpose {
    fn stream_id(self) -> u64 {
        match self {
            Purpose::Reservoir => 1,
            Purpose::Feedback => 2,
            Purpose::Basis => 3,
            Purpose::Angles => 4,
            Purpose::InitialState => 5,
            Purpose::ErrorInjection => 6,
            Purpose::TargetNoise => 7,
        }
    }
}

/// Independent generator for `(seed, purpose)`.
pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.stream_id());
    rng
}

/// Derive a per-trial seed from a master seed and grid coordinates.
///
/// splitmix64 finalizer; cheap, well mixed, and stable across platforms.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_independent_and_deterministic() {
        let mut a1 = stream(7, Purpose::Reservoir);
        let mut a2 = stream(7, Purpose::Reservoir);
        let mut b = stream(7, Purpose::Feedback);
        let xs1: Vec<u64> = (0..4).map(|_| a1.next_u64()).collect();
        let xs2: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_eq!(xs1, xs2);
        assert_ne!(xs1, ys);
    }

    #[test]
    fn derived_seeds_spread() {
        let s = derive_seed(42, 0, 0);
        assert_ne!(s, derive_seed(42, 0, 1));
        assert_ne!(s, derive_seed(42, 1, 0));
        assert_ne!(s, derive_seed(43, 0, 0));
    }
}
