#![allow(dead_code)]

use einflow_core::{sample, GridChart, MetricField, OneFormField, ScalarField, SymTensorField};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    sample::rng(seed)
}

pub fn trig(chart: &GridChart, rng: &mut ChaCha8Rng, k: i32, amp: f64, terms: usize) -> Vec<f64> {
    sample::trig(chart, rng, k, amp, terms)
}

pub fn scalar(chart: &GridChart, rng: &mut ChaCha8Rng, k: i32, amp: f64) -> ScalarField {
    sample::scalar(chart, rng, k, amp)
}

pub fn sym(chart: &GridChart, rng: &mut ChaCha8Rng, k: i32, amp: f64) -> SymTensorField {
    sample::sym(chart, rng, k, amp)
}

pub fn form(chart: &GridChart, rng: &mut ChaCha8Rng, k: i32, amp: f64) -> OneFormField {
    sample::form(chart, rng, k, amp)
}

pub fn metric(chart: &GridChart, rng: &mut ChaCha8Rng, k: i32, eps: f64) -> MetricField {
    sample::metric(chart, rng, k, eps).unwrap()
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(a.iter().map(|y| y * y).sum::<f64>().sqrt());
    d / s.max(1e-300)
}
