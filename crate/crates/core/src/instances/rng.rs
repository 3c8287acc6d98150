//! Pinned pseudo-random source for the generators.
//!
//! ChaCha8 from `rand_chacha` 0.3, seeded with `seed_from_u64`. Every draw
//! is derived from raw `u64` output here rather than through `rand`'s
//! distribution types, so instance bytes do not depend on their versions.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::gamma::ln_gamma;

pub const GENERATOR_VERSION: &str = "chacha8-v1";

pub struct InstanceRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl InstanceRng {
    /// Stream 0 of `seed`; redraws after degenerate samples use later
    /// streams.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            spare_normal: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let r = self.inner.next_u64();
            if r < zone {
                return r % n;
            }
        }
    }

    /// Standard normal by the Box–Muller transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * t.sin());
        r * t.cos()
    }

    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }

    /// Poisson draw: inversion below mean 30, PTRS (Hörmann 1993) above.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        assert!(mean >= 0.0 && mean.is_finite());
        if mean == 0.0 {
            return 0;
        }
        if mean < 30.0 {
            let mut k = 0u64;
            let mut p = (-mean).exp();
            let mut cdf = p;
            let u = self.uniform();
            while u > cdf {
                k += 1;
                p *= mean / k as f64;
                cdf += p;
                if p == 0.0 {
                    break;
                }
            }
            return k;
        }
        let slam = mean.sqrt();
        let loglam = mean.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
            let rhs = -mean + k * loglam - ln_gamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }

    /// `k` distinct indices from `0..n` in draw order (partial Fisher–Yates).
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let a: Vec<f64> = {
            let mut r = InstanceRng::new(7, 0);
            (0..5).map(|_| r.uniform()).collect()
        };
        let mut r = InstanceRng::new(7, 0);
        let b: Vec<f64> = (0..5).map(|_| r.uniform()).collect();
        assert_eq!(a, b);
        let mut other = InstanceRng::new(7, 1);
        assert_ne!(other.uniform(), a[0]);
    }

    #[test]
    fn sample_moments() {
        let mut r = InstanceRng::new(1, 0);
        let n = 200_000;
        let normals: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = normals.iter().sum::<f64>() / n as f64;
        let var = normals.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.02);
        for lam in [0.5, 5.0, 29.0, 31.0, 100.0, 5000.0] {
            let draws: Vec<f64> = (0..50_000).map(|_| r.poisson(lam) as f64).collect();
            let m = draws.iter().sum::<f64>() / draws.len() as f64;
            let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / draws.len() as f64;
            assert!((m - lam).abs() < 0.03 * lam.max(1.0), "mean {m} for {lam}");
            assert!(
                (v - lam).abs() < 0.06 * lam.max(1.0),
                "variance {v} for {lam}"
            );
        }
    }

    #[test]
    fn sampling_without_replacement_is_distinct() {
        let mut r = InstanceRng::new(3, 0);
        let mut s = r.sample_without_replacement(100, 40);
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 40);
    }
}
