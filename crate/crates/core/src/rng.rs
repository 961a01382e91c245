//! Seeded, splittable random source.
//!
//! A [`RandomSource`] wraps ChaCha8 keyed from a 64-bit seed. `fork(key)`
//! derives an independent child source from `(seed, key)` without consuming
//! draws from the parent, so work split across clusters or threads stays
//! reproducible regardless of execution order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub const ALGORITHM: &str = "chacha8/splitmix64-fork";

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM
    }

    /// Child source determined only by this source's seed and `key`.
    pub fn fork(&self, key: u64) -> RandomSource {
        RandomSource::new(splitmix64(self.seed ^ splitmix64(key.wrapping_add(1))))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Poisson draw; a zero mean yields zero.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let dist = Poisson::new(mean).expect("finite positive Poisson mean");
        dist.sample(&mut self.rng) as u64
    }

    /// Standard exponential draw.
    pub fn exp1(&mut self) -> f64 {
        // 1 - U lies in (0, 1]
        -(1.0 - self.uniform()).ln()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(7);
        let mut b = RandomSource::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn forks_ignore_parent_position() {
        let a = RandomSource::new(11);
        let mut b = RandomSource::new(11);
        b.uniform();
        assert_eq!(a.fork(3).next_u64(), b.fork(3).next_u64());
        assert_ne!(a.fork(3).next_u64(), a.fork(4).next_u64());
    }

    #[test]
    fn poisson_zero_mean() {
        let mut r = RandomSource::new(1);
        assert_eq!(r.poisson(0.0), 0);
    }
}
