use crate::rng::{self, purpose, SimRng};

/// `n` independent streams derived from `master_seed`. Stream `i` is the
/// same whatever `n` is.
pub fn seed_streams(master_seed: u64, n: usize) -> Vec<SimRng> {
    (0..n as u64)
        .map(|i| rng::stream(master_seed, purpose::TRIAL, i))
        .collect()
}

/// Environment seed of evaluation trial `trial`.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    rng::child_seed(master_seed, purpose::TRIAL, trial as u64)
}

/// Policy-side stream of evaluation trial `trial` (used by random allocation).
pub fn trial_policy_stream(master_seed: u64, trial: usize) -> SimRng {
    rng::stream(master_seed, purpose::POLICY, trial as u64)
}
