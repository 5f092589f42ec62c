use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every seeded operation in the crate.
pub type ExperimentRng = ChaCha8Rng;

/// Recorded in run metadata so results can be regenerated.
pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64";

pub fn seeded(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}
