//! Empirical Lojasiewicz exponents from entropy traces.
//!
//! Along a gradient-like flow with `|F - F_*|^sigma <= C |grad F|`, the gap and gradient
//! norm satisfy `log gap ~ (1/sigma) log |grad|`, and when `sigma > 1/2` the gap decays like
//! `(t+1)^{-1/(2 sigma - 1)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySample {
    pub time: f64,
    pub value: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Maximum RMS residual of the log-log regression.
    pub residual_threshold: f64,
    /// Exponent loss in `theta = 1 - sigma (1 + eta)`.
    pub eta: f64,
    /// Restricts the fit to samples with time in this interval.
    pub window: Option<(f64, f64)>,
    /// Gaps at or below this are treated as converged and excluded.
    pub gap_floor: f64,
    pub min_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { residual_threshold: 0.05, eta: 0.0, window: None, gap_floor: 1e-13, min_points: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LojasiewiczFit {
    /// In `[1/2, 1)`.
    pub sigma_estimate: f64,
    pub theta_estimate: f64,
    pub fit_window: (f64, f64),
    /// RMS residual of the gap-versus-gradient regression.
    pub fit_residual: f64,
    /// Slope of `log gap` against `log(t+1)`, when the power law fits.
    pub decay_exponent: Option<f64>,
    /// `(1 + 1/alpha)/2` for decay exponent `-alpha`.
    pub sigma_from_decay: Option<f64>,
    pub points_used: usize,
}

/// Least-squares line `y = a + b x`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    (a, b, (rss / n).sqrt())
}

pub fn lojasiewicz_fit(
    samples: &[EntropySample],
    reference_value: f64,
    opts: FitOptions,
) -> Result<LojasiewiczFit> {
    let used: Vec<&EntropySample> = samples
        .iter()
        .filter(|s| opts.window.is_none_or(|(a, b)| s.time >= a && s.time <= b))
        .filter(|s| {
            let gap = (s.value - reference_value).abs();
            gap > opts.gap_floor && s.gradient_norm > 0.0 && gap.is_finite() && s.gradient_norm.is_finite()
        })
        .collect();
    if used.len() < opts.min_points.max(3) {
        return Err(Error::InsufficientData(format!(
            "{} usable samples, need {}",
            used.len(),
            opts.min_points.max(3)
        )));
    }
    let lg: Vec<f64> = used.iter().map(|s| s.gradient_norm.ln()).collect();
    let lgap: Vec<f64> = used.iter().map(|s| (s.value - reference_value).abs().ln()).collect();
    let spread = lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - lg.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spread > 1e-6) {
        return Err(Error::InsufficientData("gradient norm does not vary".into()));
    }
    let (_, slope, residual) = linear_fit(&lg, &lgap);
    if residual > opts.residual_threshold {
        return Err(Error::InsufficientData(format!(
            "fit residual {residual:.3e} above threshold {:.3e}",
            opts.residual_threshold
        )));
    }
    let raw = 1.0 / slope;
    if !(raw >= 0.48 && raw < 1.0) {
        return Err(Error::InsufficientData(format!("exponent {raw:.4} outside [1/2, 1)")));
    }
    let sigma = raw.max(0.5);

    let lt: Vec<f64> = used.iter().map(|s| (s.time + 1.0).ln()).collect();
    let (decay_exponent, sigma_from_decay) = {
        let (_, b, r) = linear_fit(&lt, &lgap);
        if r <= opts.residual_threshold && b < 0.0 {
            (Some(b), Some(0.5 * (1.0 - 1.0 / b)))
        } else {
            (None, None)
        }
    };
    let t0 = used.iter().map(|s| s.time).fold(f64::INFINITY, f64::min);
    let t1 = used.iter().map(|s| s.time).fold(f64::NEG_INFINITY, f64::max);
    Ok(LojasiewiczFit {
        sigma_estimate: sigma,
        theta_estimate: 1.0 - sigma * (1.0 + opts.eta),
        fit_window: (t0, t1),
        fit_residual: residual,
        decay_exponent,
        sigma_from_decay,
        points_used: used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_decay_recovers_three_quarters() {
        // gap = (t+1)^{-2}; along the gradient flow |grad|^2 = -d gap/dt = 2 (t+1)^{-3}.
        let samples: Vec<EntropySample> = (0..40)
            .map(|k| {
                let t = 0.5 * k as f64;
                EntropySample {
                    time: t,
                    value: -(t + 1.0).powi(-2),
                    gradient_norm: (2.0 * (t + 1.0).powi(-3)).sqrt(),
                }
            })
            .collect();
        let fit = lojasiewicz_fit(&samples, 0.0, FitOptions::default()).unwrap();
        assert!((fit.decay_exponent.unwrap() + 2.0).abs() < 1e-10);
        assert!((fit.sigma_from_decay.unwrap() - 0.75).abs() < 1e-10);
        assert!((fit.sigma_estimate - 0.75).abs() < 0.02);
        assert!((fit.theta_estimate - 0.25).abs() < 0.02);
    }

    #[test]
    fn exact_power_relation_recovers_sigma() {
        for sigma in [0.5, 0.6, 0.9] {
            let samples: Vec<EntropySample> = (1..30)
                .map(|k| {
                    let grad = 0.8f64.powi(k);
                    EntropySample { time: k as f64, value: 3.0 + grad.powf(1.0 / sigma), gradient_norm: grad }
                })
                .collect();
            let fit = lojasiewicz_fit(&samples, 3.0, FitOptions::default()).unwrap();
            assert!((fit.sigma_estimate - sigma).abs() < 0.02, "{sigma} {fit:?}");
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let s = vec![EntropySample { time: 0.0, value: 1.0, gradient_norm: 1.0 }; 2];
        assert!(matches!(lojasiewicz_fit(&s, 0.0, FitOptions::default()), Err(Error::InsufficientData(_))));
    }
}
