//! Reproducible random number streams.
//!
//! Every consumer of randomness gets its own ChaCha12 stream whose 256-bit key
//! is derived from (experiment seed, domain tag, index) with splitmix64.
//! Trajectories draw from disjoint streams, so ensemble results are bitwise
//! identical for any worker count or scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Domain tag for the one-off wavenumber sampling stream.
pub const DOMAIN_MODES: u64 = 0x4d4f4445;
/// Domain tag for per-trajectory streams (field refresh + molecular noise).
pub const DOMAIN_TRAJECTORY: u64 = 0x5452414a;
/// Domain tag for per-trajectory molecular-diffusion noise.
pub const DOMAIN_TRACER_NOISE: u64 = 0x4b415050;
/// Domain tag for statistics-side oracles (fBM sampler and similar).
pub const DOMAIN_ORACLE: u64 = 0x4f52434c;

#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a 256-bit stream seed from (seed, domain, index).
pub fn stream_seed(seed: u64, domain: u64, index: u64) -> [u8; 32] {
    let mut s = seed;
    let a = splitmix64(&mut s);
    let mut s = a ^ domain.wrapping_mul(0x9e3779b97f4a7c15);
    let b = splitmix64(&mut s);
    let mut s = b ^ index.wrapping_mul(0xc2b2ae3d27d4eb4f);
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    out
}

/// Stream for sampling the frozen wavenumber set of an experiment.
pub fn modes_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(stream_seed(seed, DOMAIN_MODES, 0))
}

/// Stream owned by one trajectory; consumed sequentially within it.
pub fn trajectory_rng(seed: u64, trajectory_index: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(stream_seed(seed, DOMAIN_TRAJECTORY, trajectory_index))
}

/// Stream for one trajectory's molecular-diffusion increments, disjoint from
/// its field-refresh stream.
pub fn tracer_noise_rng(seed: u64, trajectory_index: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(stream_seed(seed, DOMAIN_TRACER_NOISE, trajectory_index))
}

/// Stream for test oracles and reference samplers.
pub fn oracle_rng(seed: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(stream_seed(seed, DOMAIN_ORACLE, index))
}
