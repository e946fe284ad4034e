//! Seed derivation.
//!
//! Every stochastic consumer draws from its own ChaCha8 stream keyed by
//! `(seed, label, round, client)`. Adding a new consumer with a fresh label
//! never shifts the values any existing consumer sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Child seed for `(seed, label, round, client)`.
pub fn derive_seed(seed: u64, label: &str, round: u64, client: &str) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    h = fnv(h, label.as_bytes());
    h = fnv(h, &[0xff]);
    h = fnv(h, &round.to_le_bytes());
    h = fnv(h, &[0xfe]);
    h = fnv(h, client.as_bytes());
    splitmix64(h)
}

/// Seeded stream for one consumer.
pub fn stream(seed: u64, label: &str, round: u64, client: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, round, client))
}

/// Standard normal draws by the Box–Muller transform, both outputs used.
///
/// Each pair consumes two `f64` uniforms `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)` and
/// yields `r·cos θ` then `r·sin θ` with `r = √(−2 ln u1)`, `θ = 2π u2`.
#[derive(Debug)]
pub struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> BoxMuller<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}
