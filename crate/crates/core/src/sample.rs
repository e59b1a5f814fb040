//! Seeded random smooth fields: trigonometric polynomials with integer wavenumbers on the
//! periodic box, so every sample is exactly periodic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{MetricField, OneFormField, ScalarField, SymTensorField};
use crate::grid::GridChart;
use crate::error::Result;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of `terms` Fourier modes with wavenumbers in `-k..=k` per axis and coefficients
/// uniform in `[-1, 1)`, scaled by `amp / sqrt(terms)`.
pub fn trig<R: Rng>(chart: &GridChart, rng: &mut R, k: i32, amp: f64, terms: usize) -> Vec<f64> {
    let n = chart.dim();
    let mut modes = Vec::with_capacity(terms);
    for _ in 0..terms {
        let kv: Vec<f64> = (0..n)
            .map(|a| rng.random_range(-k..=k) as f64 * std::f64::consts::TAU / chart.lengths()[a])
            .collect();
        let c = rng.random_range(-1.0..1.0);
        let s = rng.random_range(-1.0..1.0);
        modes.push((kv, c, s));
    }
    let norm = amp / (terms as f64).sqrt();
    chart.sample(|x| {
        modes
            .iter()
            .map(|(kv, c, s)| {
                let ph: f64 = kv.iter().zip(x).map(|(a, b)| a * b).sum();
                c * ph.cos() + s * ph.sin()
            })
            .sum::<f64>()
            * norm
    })
}

const TERMS: usize = 6;

pub fn scalar<R: Rng>(chart: &GridChart, rng: &mut R, k: i32, amp: f64) -> ScalarField {
    ScalarField::new(chart.clone(), trig(chart, rng, k, amp, TERMS)).expect("sampled on chart")
}

pub fn sym<R: Rng>(chart: &GridChart, rng: &mut R, k: i32, amp: f64) -> SymTensorField {
    let n = chart.dim();
    let comps = (0..n * (n + 1) / 2).map(|_| trig(chart, rng, k, amp, TERMS)).collect();
    SymTensorField::new(chart.clone(), comps).expect("sampled on chart")
}

pub fn form<R: Rng>(chart: &GridChart, rng: &mut R, k: i32, amp: f64) -> OneFormField {
    let comps = (0..chart.dim()).map(|_| trig(chart, rng, k, amp, TERMS)).collect();
    OneFormField::new(chart.clone(), comps).expect("sampled on chart")
}

/// `delta + eps S` with `S` from [`sym`] at unit amplitude; fails if not positive definite.
pub fn metric<R: Rng>(chart: &GridChart, rng: &mut R, k: i32, eps: f64) -> Result<MetricField> {
    let s = sym(chart, rng, k, 1.0);
    MetricField::new(SymTensorField::identity(chart).axpy(eps, &s)?)
}
