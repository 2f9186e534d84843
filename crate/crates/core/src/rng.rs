//! Seeded, platform-independent random stream used by every stochastic op.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Deterministic pseudo-random stream. Same seed, same sequence, on every
/// platform: integer draws go through `u64` and never through `usize`.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent child stream; advances `self` by one draw.
    pub fn fork(&mut self) -> Rng {
        Rng::seeded(self.0.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.0.random_range(0..n as u64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn beta(&mut self, a: f64, b: f64) -> Result<f64> {
        let dist = Beta::new(a, b)
            .map_err(|e| Error::InvalidConfig(format!("beta({a}, {b}): {e}")))?;
        Ok(dist.sample(&mut self.0))
    }

    /// Symmetric Dirichlet(α, …, α) draw of length `k`, normalized so the
    /// weights sum to one.
    pub fn dirichlet(&mut self, alpha: f64, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::InvalidConfig("dirichlet needs k >= 1".into()));
        }
        let gamma = Gamma::new(alpha, 1.0)
            .map_err(|e| Error::InvalidConfig(format!("dirichlet alpha {alpha}: {e}")))?;
        let mut w: Vec<f64> = (0..k).map(|_| gamma.sample(&mut self.0)).collect();
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            // every gamma draw underflowed; fall back to a one-hot vertex
            let hot = self.below(k);
            w.iter_mut().enumerate().for_each(|(i, v)| *v = if i == hot { 1.0 } else { 0.0 });
            return Ok(w);
        }
        for v in &mut w {
            *v /= sum;
        }
        Ok(w)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, uniformly without replacement.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}

/// Derives a per-item seed from a master seed and a key such as a file name.
/// Stable across runs, platforms and corpus composition.
pub fn sub_seed(master: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::seeded(42);
        let mut b = Rng::seeded(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn stream_is_pinned() {
        // guards against silent upstream algorithm changes
        let mut r = Rng::seeded(0);
        assert_eq!(r.next_u64(), 13080132717333068652);
        assert_eq!(r.uniform(), 0.46592172228961015);
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut r = Rng::seeded(7);
        for alpha in [0.1, 1.0, 5.0] {
            for k in 1..6 {
                let w = r.dirichlet(alpha, k).unwrap();
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(w.iter().all(|v| *v >= 0.0));
            }
        }
        assert!(r.dirichlet(0.0, 3).is_err());
        assert!(r.dirichlet(1.0, 0).is_err());
    }

    #[test]
    fn sample_indices_distinct() {
        let mut r = Rng::seeded(3);
        let mut s = r.sample_indices(16, 8);
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|i| *i < 16));
    }

    #[test]
    fn sub_seed_depends_on_both_inputs() {
        assert_eq!(sub_seed(1, "a.png"), sub_seed(1, "a.png"));
        assert_ne!(sub_seed(1, "a.png"), sub_seed(2, "a.png"));
        assert_ne!(sub_seed(1, "a.png"), sub_seed(1, "b.png"));
    }
}
