use rand::{Rng as _, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// The PRNG behind weight init and shuffling: xoshiro256++ seeded through
/// SplitMix64 (`seed_from_u64`).
pub type Rng = Xoshiro256PlusPlus;

pub fn seeded_rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// `n` draws from U(-b, b) with `b = gain * sqrt(3 / fan_in)`.
///
/// With `gain = sqrt(2)` this is the He/Kaiming uniform bound for ReLU layers.
pub fn kaiming_uniform(rng: &mut Rng, fan_in: usize, n: usize, gain: f64) -> Vec<f64> {
    let bound = gain * (3.0 / fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}
