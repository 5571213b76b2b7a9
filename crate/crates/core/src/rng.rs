//! Deterministic RNG stream derivation.
//!
//! Every stochastic draw in a run comes from a stream keyed by
//! (master seed, agent id, iteration), so two algorithms sharing a master
//! seed draw identical minibatches at every (agent, iteration) pair. This is
//! what makes seed-exact reduction checks (tau = 1, omega = 1) possible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG stream for one agent at one iteration.
pub fn agent_stream(master_seed: u64, agent: usize, iteration: usize) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ splitmix64(agent as u64 ^ 0xa5a5_a5a5_a5a5_a5a5));
    let c = splitmix64(b ^ splitmix64(iteration as u64 ^ 0x5a5a_5a5a_5a5a_5a5a));
    let d = splitmix64(c);
    seed[0..8].copy_from_slice(&a.to_le_bytes());
    seed[8..16].copy_from_slice(&b.to_le_bytes());
    seed[16..24].copy_from_slice(&c.to_le_bytes());
    seed[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Derives a fresh 64-bit sub-seed, used for replica and partition seeding.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(label))
}
