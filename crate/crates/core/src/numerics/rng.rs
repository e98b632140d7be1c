//! Seeds and seeded random streams.
//!
//! A [`Seed`] is a plain `u64`. Child seeds for replicates or labelled
//! sub-tasks are derived by hashing, so a fan-out produces the same streams
//! regardless of scheduling order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Self(value)
    }

    pub fn value(&self) -> u64 {
        self.0
    }

    /// Child seed keyed by a path of labels, e.g. `["diagnosis", "screening", "train"]`.
    pub fn derive(&self, path: &[&str]) -> Seed {
        let state = path.iter().fold(splitmix64(self.0), |state, part| {
            splitmix64(state ^ fnv1a(part.as_bytes()))
        });
        Seed(state)
    }

    /// Child seed for the `index`-th replicate.
    pub fn replicate(&self, index: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ splitmix64(index.wrapping_add(1))))
    }

    pub fn stream(&self) -> RngStream {
        RngStream(ChaCha8Rng::seed_from_u64(self.0))
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A seeded ChaCha8 stream. Owned by exactly one consumer at a time.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_identical_streams() {
        let mut a = Seed(42).stream();
        let mut b = Seed(42).stream();
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn known_first_draw_is_stable() {
        // Pinned so that a dependency upgrade that changes the stream is noticed.
        assert_eq!(Seed(7).stream().next_u64(), 2_910_824_217_569_608_635);
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let root = Seed(1);
        let a = root.derive(&["prognosis", "screening"]);
        let b = root.derive(&["prognosis", "gp"]);
        let c = root.derive(&["prognosisscreening"]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, Seed(1).derive(&["prognosis", "screening"]));
        assert_ne!(root.replicate(0), root.replicate(1));
    }
}
