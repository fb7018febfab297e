use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domains separating the independent uses of randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Initial = 1,
    Noise = 2,
    Directions = 3,
    Resample = 4,
}

/// 32-bit words reserved per (particle, step) in the noise stream.
const WORDS_PER_STEP: u128 = 16;

/// Counter-based generator: every draw is a pure function of
/// `(seed, replica, tag, index, counter)`, so results do not depend on the
/// order or thread in which particles are processed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub replica: u64,
}

impl RngSpec {
    pub fn new(seed: u64, replica: u64) -> Self {
        Self { seed, replica }
    }

    /// A generator positioned at block `counter` of stream `index`.
    pub fn stream(&self, tag: StreamTag, index: u64, counter: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replica.to_le_bytes());
        key[16..24].copy_from_slice(&(tag as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng.set_word_pos(counter as u128 * WORDS_PER_STEP);
        rng
    }

    /// `d ≤ 3` standard normals for particle `index` at time step `step`.
    pub fn gaussians(&self, index: u64, step: u64, out: &mut [f64]) {
        let mut rng = self.stream(StreamTag::Noise, index, step);
        fill_gaussians(&mut rng, out);
    }
}

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box–Muller pairs.
pub fn fill_gaussians(rng: &mut impl RngCore, out: &mut [f64]) {
    for pair in out.chunks_mut(2) {
        let u1 = 1.0 - uniform(rng);
        let u2 = uniform(rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        pair[0] = r * theta.cos();
        if pair.len() > 1 {
            pair[1] = r * theta.sin();
        }
    }
}
