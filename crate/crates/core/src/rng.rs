//! Counter-based deterministic random numbers.
//!
//! Every draw is a pure function of a key tuple (seed, stream, index, ...),
//! so ensembles can be evaluated in any order, on any number of threads,
//! and still reproduce bit-identically. There is no generator state to
//! share or advance.

const MIX_A: u64 = 0xbf58476d1ce4e5b9;
const MIX_B: u64 = 0x94d049bb133111eb;
const GOLDEN: u64 = 0x9e3779b97f4a7c15;

/// 64-bit avalanche finalizer; bijective, every output bit depends on every
/// input bit.
#[inline]
pub fn avalanche(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(MIX_A);
    z ^= z >> 27;
    z = z.wrapping_mul(MIX_B);
    z ^= z >> 31;
    z
}

/// Hashes a key tuple into one 64-bit word. Order-sensitive: the running
/// state passes through the avalanche between parts.
#[inline]
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &p in parts {
        h = avalanche(h ^ p).wrapping_add(GOLDEN);
    }
    avalanche(h)
}

/// Derives an independent child seed, e.g. per replicate index.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(&[master, index])
}

/// Uniform on (0, 1]: safe as a log argument.
#[inline]
pub fn uniform_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Uniform on [0, 1).
#[inline]
pub fn uniform_half_open(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Standard normal via Box-Muller on two keyed uniforms.
///
/// Computed in `f64` regardless of the consumer's scalar so that narrower
/// precisions see the same rounded values.
#[inline]
pub fn standard_normal(parts: &[u64]) -> f64 {
    let mut key = Vec::with_capacity(parts.len() + 1);
    key.extend_from_slice(parts);
    key.push(0);
    let u1 = uniform_open(mix(&key));
    *key.last_mut().unwrap() = 1;
    let u2 = uniform_half_open(mix(&key));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
