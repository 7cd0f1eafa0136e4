//! Seeded random streams.
//!
//! Every random component draws from its own `Xoshiro256PlusPlus` stream. A
//! stream seed is derived from a master seed and a path of integers by
//! folding each element through the SplitMix64 finalizer:
//!
//! ```text
//! h0 = splitmix64(master)
//! h_{i+1} = splitmix64(h_i ^ splitmix64(path[i] + 0x9E37_79B9_7F4A_7C15 * (i + 1)))
//! ```
//!
//! The result seeds the generator through `SeedableRng::seed_from_u64`. Both
//! algorithms are fully specified, so streams are identical on every platform.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Component tags used as path elements.
pub mod tag {
    pub const REGISTER: u64 = 1;
    pub const CROSSTALK: u64 = 2;
    pub const RECOVERY: u64 = 3;
    pub const BATCH: u64 = 4;
    pub const SQD: u64 = 5;
    pub const ORDER: u64 = 6;
    pub const RUN: u64 = 7;
}

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().enumerate().fold(splitmix64(master), |h, (i, &p)| {
        splitmix64(h ^ splitmix64(p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))))
    })
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}

/// Uniform integer in `[0, n)`, drawn through `u64` so the result does not
/// depend on the platform's pointer width.
#[inline]
pub fn below<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.gen_range(0..n as u64) as usize
}

/// Fisher–Yates shuffle built on [`below`].
pub fn shuffle<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen values: any change here breaks reproducibility of saved runs.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        let a = derive_seed(42, &[1, 2, 3]);
        assert_eq!(a, derive_seed(42, &[1, 2, 3]));
        assert_ne!(a, derive_seed(42, &[1, 3, 2]));
        assert_ne!(a, derive_seed(43, &[1, 2, 3]));
        assert_ne!(derive_seed(42, &[]), derive_seed(42, &[0]));
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = stream(7, &[]);
        let mut v: Vec<usize> = (0..50).collect();
        shuffle(&mut rng, &mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
