//! Seeded Monte Carlo averages over `S^{2m-1}`, the floating-point cross-check for the exact
//! sphere integrals.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::poly::ZPoly;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl MonteCarloEstimate {
    /// `|mean - exact| <= k * standard_error`.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        (self.mean - exact).abs() <= k * self.standard_error
    }
}

/// Uniform point on `S^{2m-1}` from a normalized Gaussian vector.
pub fn sample_sphere<R: rand::Rng>(complex_dim: usize, rng: &mut R) -> Vec<Complex64> {
    loop {
        let z: Vec<Complex64> = (0..complex_dim)
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let r = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if r > 1e-12 {
            return z.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Average of the real part of `p` over `S^{2m-1}`.
pub fn monte_carlo_average(p: &ZPoly, samples: u64, seed: u64) -> MonteCarloEstimate {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let z = sample_sphere(p.complex_dim(), &mut rng);
        let v = p.eval(&z).re;
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    MonteCarloEstimate { mean, standard_error: (var / n).sqrt(), samples, seed }
}
