//! Counter-based random streams.
//!
//! Every replicate owns an independent ChaCha8 stream addressed by
//! `(master seed, domain, index)`: the seed and domain form the cipher key and
//! the replicate index selects the stream. A replicate's numbers therefore do
//! not depend on which worker runs it or in which order replicates finish.

use std::f64::consts::SQRT_2;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

/// Separates the streams used by unrelated consumers of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Multiplier = 1,
    Empirical = 2,
    Reweighted = 3,
    SimData = 16,
    SimReference = 17,
    SimSanity = 18,
    SimBootstrap = 19,
    Reference = 32,
}

#[derive(Debug, Clone)]
pub struct ReplicateRng {
    inner: ChaCha8Rng,
}

impl ReplicateRng {
    pub fn new(seed: u64, domain: Domain, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(index);
        Self { inner }
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion of the uniform stream.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform_open())
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_open() < p
    }
}

impl RngCore for ReplicateRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Standard normal quantile function.
pub fn inverse_normal_cdf(u: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * u)
}
