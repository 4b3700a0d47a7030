use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// SplitMix64 output function applied to `seed`:
///
/// ```text
/// z = seed + 0x9e3779b97f4a7c15            (mod 2^64)
/// z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9 (mod 2^64)
/// z = (z ^ (z >> 27)) * 0x94d049bb133111eb (mod 2^64)
/// z ^ (z >> 31)
/// ```
///
/// Replication `r` of an experiment with base seed `s` runs on
/// `mix_seed(s + r)`, so neighbouring replications get unrelated streams.
pub fn mix_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// xoshiro256++ seeded from `mix_seed(seed)` (its state expanded by
/// SplitMix64, as `SeedableRng::seed_from_u64` does).
pub fn seeded_rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(mix_seed(seed))
}

/// Uniform draw on `[0, 1)` with 53 random bits.
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator started at 0.
        assert_eq!(mix_seed(0), 0xe220a8397b1dcdaf);
        assert_eq!(mix_seed(0x9e3779b97f4a7c15), 0x6e789e6aa1b965f4);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = seeded_rng(7);
        for _ in 0..10_000 {
            let u = uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
