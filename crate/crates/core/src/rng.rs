//! Seeded random streams for simulation.
//!
//! Every path draws from its own ChaCha8 stream: the master seed keys the
//! generator through `seed_from_u64`, and the 64-bit stream id is
//! `(replication << 8) | role`. Uniforms take the top 53 bits of each
//! output word and exponentials use `libm::log`, so a given
//! `(seed, replication, role)` yields the same variates on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Description of the generator and stream derivation, echoed in reports.
pub const GENERATOR: &str = "ChaCha8Rng(seed_from_u64(seed)), stream = (replication << 8) | role";

/// Stream roles, so that different uses of one replication never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Path = 0,
    SecondPath = 1,
    Stationary = 2,
    Test = 255,
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

const INV_2_53: f64 = 1.0 / 9007199254740992.0;

impl StreamRng {
    pub fn new(seed: u64, replication: u64, role: Role) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream((replication << 8) | role as u64);
        StreamRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * INV_2_53
    }

    /// Exponential with the given rate (mean `1/rate`).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.uniform_open0()) / rate
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        let i = (self.uniform() * n as f64) as usize;
        i.min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = StreamRng::new(7, 3, Role::Path);
        let mut b = StreamRng::new(7, 3, Role::Path);
        let mut c = StreamRng::new(7, 4, Role::Path);
        let xa: alloc::vec::Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: alloc::vec::Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xc: alloc::vec::Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn uniform_ranges() {
        let mut r = StreamRng::new(1, 0, Role::Test);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = r.uniform_open0();
            assert!(v > 0.0 && v <= 1.0);
            assert!(r.index(3) < 3);
        }
    }

    #[test]
    fn exponential_mean() {
        let mut r = StreamRng::new(11, 0, Role::Test);
        let n = 200_000;
        let mean = (0..n).map(|_| r.exponential(4.0)).sum::<f64>() / n as f64;
        // sd of the mean is 0.25 / sqrt(n) ≈ 5.6e-4
        assert!((mean - 0.25).abs() < 3e-3, "{mean}");
    }
}
