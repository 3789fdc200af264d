use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Independent stream for one trial: the master seed picks the key and the
/// trial index picks the ChaCha stream, so trials never share randomness and
/// can run in any order.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}
