//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(master seed, purpose)` and
//! selected by a 64-bit stream index, so stream `i` never depends on how many
//! other streams were derived or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags keep the streams of different subsystems apart.
pub mod purpose {
    pub const TRIAL: u64 = 0x7472_6961_6c00_0001;
    pub const WORLD: u64 = 0x776f_726c_6400_0002;
    pub const CHANNEL: u64 = 0x6368_616e_0000_0003;
    pub const POLICY: u64 = 0x706f_6c69_6379_0004;
    pub const AGENT: u64 = 0x6167_656e_7400_0005;
    pub const INIT: u64 = 0x696e_6974_0000_0006;
    pub const EPISODE: u64 = 0x6570_6973_6f64_0007;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns stream `index` of the family keyed by `(master, purpose)`.
pub fn stream(master: u64, purpose: u64, index: u64) -> SimRng {
    let mut state = master ^ purpose.rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, e.g. the per-trial seed handed to an environment.
pub fn child_seed(master: u64, purpose: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(master, purpose, index).next_u64()
}
