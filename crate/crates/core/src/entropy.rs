//! Perelman's lambda, the expander entropy `mu_+` and the shrinker entropy `nu_-`.
//!
//! The expander entropy is minimized in the variable `w = e^{-f/2}`:
//! `W(w) = int 2|dw|^2 + scal w^2 / 2 + w^2 log w^2` over `|w|_{L^2} = 1`, whose
//! Euler-Lagrange equation is `2 Delta w + scal w / 2 + 2 w log w = mu w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, SymTensorField};
use crate::geometry;
use crate::spectral::{eigen_smallest, pcg, EigenOptions, FlatPreconditioner, WeakLaplacian};

/// `x log x` with the limit value at zero.
pub fn xlogx(x: f64) -> f64 {
    if x <= 1e-30 {
        0.0
    } else {
        x * x.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySolveResult {
    pub value: f64,
    /// `w = e^{-f/2}`.
    pub minimizer_w: ScalarField,
    pub minimizer_f: ScalarField,
    pub tau: Option<f64>,
    /// `L^2` norm of the Euler-Lagrange residual in the `w` variable.
    pub el_residual_l2: f64,
    /// `L^2` norm of the Euler-Lagrange residual in the `f` variable, evaluated with the
    /// pointwise Laplacian; agrees with the `w` residual up to discretization error.
    pub el_residual_f_l2: Option<f64>,
    /// `|int e^{-f} dV - 1|`.
    pub constraint_residual: f64,
    pub iterations: usize,
}

fn weighted_dot(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter().zip(b).zip(weights).map(|((x, y), w)| x * y * w).sum()
}

/// Smallest eigenvalue of `-4 Delta + scal`, i.e. the infimum of
/// `int (scal + |df|^2) e^{-f} dV` over `int e^{-f} dV = 1`.
pub fn lambda_perelman(g: &MetricField) -> Result<EntropySolveResult> {
    lambda_with(g, EigenOptions::default())
}

pub fn lambda_with(g: &MetricField, opts: EigenOptions) -> Result<EntropySolveResult> {
    let scal = geometry::scalar_curvature(g);
    let eig = eigen_smallest(g, 4.0, &scal, EigenOptions { count: 1, ..opts })?;
    let w = eig.vectors[0].clone();
    let min_w = w.min();
    if !(min_w > 0.0) {
        return Err(Error::PositivityLoss { min_value: min_w, floor: 0.0 });
    }
    let f = w.map(|v| -2.0 * v.ln());
    let weights = geometry::quadrature_weights(g);
    let mass: f64 = w.values.iter().zip(&weights).map(|(v, m)| v * v * m).sum();
    Ok(EntropySolveResult {
        value: eig.values[0],
        minimizer_w: w,
        minimizer_f: f,
        tau: None,
        el_residual_l2: eig.residuals[0],
        el_residual_f_l2: None,
        constraint_residual: (mass - 1.0).abs(),
        iterations: eig.iterations,
    })
}

/// The discrete functional `W(w)` with the weak-form Dirichlet energy.
pub fn w_tilde(g: &MetricField, w: &ScalarField) -> Result<f64> {
    g.chart().same_as(&w.chart)?;
    let lap = WeakLaplacian::new(g);
    let scal = geometry::scalar_curvature(g);
    Ok(w_tilde_with(&lap, &scal.values, &geometry::quadrature_weights(g), &w.values))
}

fn w_tilde_with(lap: &WeakLaplacian, scal: &[f64], weights: &[f64], w: &[f64]) -> f64 {
    let pot: f64 = w
        .iter()
        .zip(scal)
        .zip(weights)
        .map(|((v, s), m)| (0.5 * s * v * v + xlogx(v * v)) * m)
        .sum();
    2.0 * lap.energy(w) + pot
}

/// `int [ (|df|^2 + scal)/2 - f ] e^{-f} dV`, with the gradient term evaluated through
/// `w = e^{-f/2}` in the same weak form used by the minimizer. No constraint is imposed.
pub fn w_plus_eval(g: &MetricField, f: &ScalarField) -> Result<f64> {
    g.chart().same_as(&f.chart)?;
    let lap = WeakLaplacian::new(g);
    let scal = geometry::scalar_curvature(g);
    let weights = geometry::quadrature_weights(g);
    let w: Vec<f64> = f.values.iter().map(|v| (-0.5 * v).exp()).collect();
    let pot: f64 = f
        .values
        .iter()
        .zip(&w)
        .zip(scal.values.iter().zip(&weights))
        .map(|((fv, wv), (s, m))| (0.5 * s - fv) * wv * wv * m)
        .sum();
    Ok(2.0 * lap.energy(&w) + pot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuPlusOptions {
    /// Required Euler-Lagrange residual.
    pub el_tol: f64,
    /// Residual at which Newton stops early.
    pub target_tol: f64,
    pub max_newton: usize,
    pub warm_start_iters: usize,
    pub positivity_floor: f64,
    pub inner_tol: f64,
}

impl Default for MuPlusOptions {
    fn default() -> Self {
        MuPlusOptions {
            el_tol: 1e-9,
            target_tol: 1e-12,
            max_newton: 60,
            warm_start_iters: 10,
            positivity_floor: 1e-12,
            inner_tol: 1e-13,
        }
    }
}

struct MuPlusProblem {
    lap: WeakLaplacian,
    scal: Vec<f64>,
    weights: Vec<f64>,
    mass: Vec<f64>,
}

impl MuPlusProblem {
    fn normalize(&self, w: &mut [f64]) {
        let n = weighted_dot(w, w, &self.weights).sqrt();
        w.iter_mut().for_each(|v| *v /= n);
    }

    fn residual(&self, w: &[f64], mu: f64) -> Vec<f64> {
        let lw = self.lap.apply(w);
        (0..w.len())
            .map(|i| {
                let wl = if w[i] <= 1e-30 { 0.0 } else { 2.0 * w[i] * w[i].ln() };
                2.0 * lw[i] + 0.5 * self.scal[i] * w[i] + wl - mu * w[i]
            })
            .collect()
    }

    fn l2(&self, r: &[f64]) -> f64 {
        weighted_dot(r, r, &self.weights).sqrt()
    }
}

/// Minimizes `W(w)` by a preconditioned gradient warm start followed by Newton's method on
/// `(log w, mu)` for the Euler-Lagrange system with the normalization constraint.
pub fn mu_plus_solve(g: &MetricField) -> Result<EntropySolveResult> {
    mu_plus_solve_with(g, MuPlusOptions::default(), None)
}

pub fn mu_plus_solve_with(
    g: &MetricField,
    opts: MuPlusOptions,
    initial: Option<&ScalarField>,
) -> Result<EntropySolveResult> {
    let nodes = g.chart().node_count();
    let lap = WeakLaplacian::new(g);
    let mass = lap.mass().to_vec();
    let prob = MuPlusProblem {
        scal: geometry::scalar_curvature(g).values,
        weights: geometry::quadrature_weights(g),
        mass,
        lap,
    };
    let mut w: Vec<f64> = match initial {
        Some(w0) => {
            g.chart().same_as(&w0.chart)?;
            w0.values.clone()
        }
        None => vec![1.0; nodes],
    };
    prob.normalize(&mut w);
    let mut mu = w_tilde_with(&prob.lap, &prob.scal, &prob.weights, &w);

    let warm = FlatPreconditioner::new(&prob.lap, 2.0, 2.0);
    if initial.is_none() {
        for _ in 0..opts.warm_start_iters {
            let r = prob.residual(&w, mu);
            let mr: Vec<f64> = r.iter().zip(&prob.mass).map(|(a, b)| a * b).collect();
            let step = warm.solve(&mr);
            let floor = 1e-3 * w.iter().copied().fold(f64::INFINITY, f64::min);
            for i in 0..nodes {
                w[i] = (w[i] - step[i]).max(floor);
            }
            prob.normalize(&mut w);
            mu = w_tilde_with(&prob.lap, &prob.scal, &prob.weights, &w);
        }
    }

    let mut res = prob.l2(&prob.residual(&w, mu));
    let mut iterations = 0;
    while res > opts.target_tol && iterations < opts.max_newton {
        iterations += 1;
        let c: Vec<f64> = (0..nodes)
            .map(|i| 0.5 * prob.scal[i] + 2.0 * w[i].max(1e-300).ln() + 2.0 - mu)
            .collect();
        let cbar = (c.iter().sum::<f64>() / nodes as f64).max(0.5);
        let pre = FlatPreconditioner::new(&prob.lap, 2.0, cbar);
        let op = |x: &[f64]| -> Vec<f64> {
            let k = prob.lap.stiffness(x);
            (0..nodes).map(|i| 2.0 * k[i] + prob.mass[i] * c[i] * x[i]).collect()
        };
        let precond = |r: &[f64]| pre.solve(r);
        let f1 = prob.residual(&w, mu);
        let rhs_a: Vec<f64> = (0..nodes).map(|i| -prob.mass[i] * f1[i]).collect();
        let rhs_b: Vec<f64> = (0..nodes).map(|i| prob.mass[i] * w[i]).collect();
        let (sa, _) = pcg(&op, &precond, &rhs_a, None, opts.inner_tol, 4000)?;
        let (sb, _) = pcg(&op, &precond, &rhs_b, None, opts.inner_tol, 4000)?;
        let norm_sq = weighted_dot(&w, &w, &prob.weights);
        let wb = weighted_dot(&w, &sb, &prob.weights);
        if wb.abs() < 1e-300 {
            return Err(Error::NoConvergence { solver: "mu_plus newton (singular border)", iterations, residual: res });
        }
        let dmu = ((1.0 - norm_sq) / 2.0 - weighted_dot(&w, &sa, &prob.weights)) / wb;
        let dw: Vec<f64> = (0..nodes).map(|i| sa[i] + dmu * sb[i]).collect();

        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial: Vec<f64> = (0..nodes)
                .map(|i| w[i] * (s * dw[i] / w[i]).clamp(-5.0, 5.0).exp())
                .collect();
            prob.normalize(&mut trial);
            let tmu = w_tilde_with(&prob.lap, &prob.scal, &prob.weights, &trial);
            let tres = prob.l2(&prob.residual(&trial, tmu));
            if tres.is_finite() && (tres < res || s < 1e-3 && tres < 1.5 * res) {
                w = trial;
                mu = tmu;
                res = tres;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
        let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
        if min_w < opts.positivity_floor {
            return Err(Error::PositivityLoss { min_value: min_w, floor: opts.positivity_floor });
        }
    }
    if !(res <= opts.el_tol) {
        return Err(Error::NoConvergence { solver: "mu_plus newton", iterations, residual: res });
    }
    let chart = g.chart().clone();
    let wf = ScalarField { chart: chart.clone(), values: w };
    let f = wf.map(|v| -2.0 * v.ln());
    let el_f = f_residual(g, &f, mu)?;
    let mass: f64 = weighted_dot(&wf.values, &wf.values, &prob.weights);
    Ok(EntropySolveResult {
        value: mu,
        minimizer_w: wf,
        minimizer_f: f,
        tau: None,
        el_residual_l2: res,
        el_residual_f_l2: Some(el_f),
        constraint_residual: (mass - 1.0).abs(),
        iterations,
    })
}

/// `| -Delta f - |df|^2/2 + scal/2 - f - mu |_{L^2}` with the pointwise Laplacian.
fn f_residual(g: &MetricField, f: &ScalarField, mu: f64) -> Result<f64> {
    let lap = geometry::laplacian(g, f)?;
    let grad = geometry::gradient_norm_sq(g, f)?;
    let scal = geometry::scalar_curvature(g);
    let r = ScalarField {
        chart: g.chart().clone(),
        values: (0..f.values.len())
            .map(|i| {
                let v = -lap.values[i] - 0.5 * grad.values[i] + 0.5 * scal.values[i]
                    - f.values[i]
                    - mu;
                v * v
            })
            .collect(),
    };
    Ok(geometry::integrate(g, &r)?.sqrt())
}

/// `Ric + g + Hess f` at the minimizer; its weighted `L^2` norm is the gradient of `mu_+`.
pub fn mu_plus_gradient(g: &MetricField, sol: &EntropySolveResult) -> Result<SymTensorField> {
    let ric = geometry::ricci(g);
    let hess = geometry::hessian(g, &sol.minimizer_f)?;
    ric.axpy(1.0, g.tensor())?.axpy(1.0, &hess)
}

/// `int |Ric + g + Hess f|^2 e^{-f} dV`.
pub fn mu_plus_gradient_norm_sq(g: &MetricField, sol: &EntropySolveResult) -> Result<f64> {
    let grad = mu_plus_gradient(g, sol)?;
    let p = geometry::pointwise_inner_sym(g, &grad, &grad)?;
    let w2 = sol.minimizer_w.map(|v| v * v);
    let integrand = ScalarField {
        chart: g.chart().clone(),
        values: p.values.iter().zip(&w2.values).map(|(a, b)| a * b).collect(),
    };
    geometry::integrate(g, &integrand)
}

/// `-1/2 int <Ric + g + Hess f, h> e^{-f} dV` at the minimizer `sol` of `g`.
pub fn mu_plus_first_variation(
    g: &MetricField,
    h: &SymTensorField,
    sol: &EntropySolveResult,
) -> Result<f64> {
    let grad = mu_plus_gradient(g, sol)?;
    let p = geometry::pointwise_inner_sym(g, &grad, h)?;
    let integrand = ScalarField {
        chart: g.chart().clone(),
        values: p.values.iter().zip(&sol.minimizer_w.values).map(|(a, w)| a * w * w).collect(),
    };
    Ok(-0.5 * geometry::integrate(g, &integrand)?)
}

/// Closed form `scal/2 - log vol` for constant scalar curvature.
pub fn mu_plus_csc(volume: f64, scal: f64) -> f64 {
    0.5 * scal - volume.ln()
}

/// Jensen lower bound `inf scal / 2 - log vol`.
pub fn mu_plus_lower_bound(g: &MetricField) -> f64 {
    0.5 * geometry::scalar_curvature(g).min() - geometry::volume(g).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondVariation {
    pub value: f64,
    /// True when evaluated on a flat background, where only the quadratic structure of
    /// the formula is meaningful.
    pub structural: bool,
}

/// `-1/4 avg int <Delta_E h, h> dV` for divergence-free `h` at an Einstein metric with
/// constant `-1`, or at a flat metric in structural mode.
pub fn mu_plus_second_variation_einstein(
    g: &MetricField,
    h: &SymTensorField,
) -> Result<SecondVariation> {
    let ric = geometry::ricci(g);
    let scale = g.tensor().max_abs().max(1e-300);
    let structural = if ric.max_abs() <= 1e-8 * scale {
        true
    } else if ric.axpy(1.0, g.tensor())?.max_abs() <= 1e-8 * scale {
        false
    } else {
        return Err(Error::NonEinsteinBackgroundForClosedForm(
            "background is neither flat nor Einstein with constant -1".into(),
        ));
    };
    let div = geometry::divergence(g, h)?;
    let dnorm = geometry::l2_norm_form(g, &div)?;
    let rough = geometry::rough_laplacian(g, h)?;
    let energy = geometry::l2_inner_sym(g, &rough, h)?.max(0.0).sqrt();
    let hnorm = geometry::l2_norm_sym(g, h)?;
    let relative = if dnorm <= 1e-12 * hnorm.max(1e-300) { 0.0 } else { dnorm / energy.max(1e-300) };
    if relative > 1e-6 {
        return Err(Error::NotDivergenceFree { relative });
    }
    let de = geometry::einstein_operator(g, h)?;
    let vol = geometry::volume(g);
    Ok(SecondVariation { value: -0.25 * geometry::l2_inner_sym(g, &de, h)? / vol, structural })
}

/// Dimension, volume and (constant) scalar curvature of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CscData {
    pub dim: usize,
    pub volume: f64,
    pub scal: f64,
}

impl CscData {
    pub fn new(dim: usize, volume: f64, scal: f64) -> Result<Self> {
        if dim < 2 || !(volume > 0.0) {
            return Err(Error::InvalidInput(format!("dim {dim}, volume {volume}")));
        }
        Ok(CscData { dim, volume, scal })
    }

    /// Reads off the data of a grid metric, requiring constant scalar curvature.
    pub fn from_grid(g: &MetricField, tolerance: f64) -> Result<Self> {
        let scal = geometry::scalar_curvature(g);
        let osc = scal.max() - scal.min();
        if osc > tolerance {
            return Err(Error::NonConstantScalar { oscillation: osc, tolerance });
        }
        let mean = scal.values.iter().sum::<f64>() / scal.values.len() as f64;
        Ok(CscData { dim: g.dim(), volume: geometry::volume(g), scal: mean })
    }

    pub fn scaled(&self, c: f64) -> Self {
        let n = self.dim as f64;
        CscData { dim: self.dim, volume: self.volume * c.powf(n / 2.0), scal: self.scal / c }
    }
}

/// `W_-(g, f, tau) = (4 pi tau)^{-n/2} int [tau(|df|^2 + scal) + f - n] e^{-f} dV`.
pub fn w_minus_eval(g: &MetricField, f: &ScalarField, tau: f64) -> Result<f64> {
    g.chart().same_as(&f.chart)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau = {tau}")));
    }
    let n = g.dim() as f64;
    let lap = WeakLaplacian::new(g);
    let scal = geometry::scalar_curvature(g);
    let weights = geometry::quadrature_weights(g);
    let w: Vec<f64> = f.values.iter().map(|v| (-0.5 * v).exp()).collect();
    let pot: f64 = (0..w.len())
        .map(|i| (tau * scal.values[i] + f.values[i] - n) * w[i] * w[i] * weights[i])
        .sum();
    Ok((4.0 * tau * lap.energy(&w) + pot) / (4.0 * std::f64::consts::PI * tau).powf(n / 2.0))
}

/// `W_-` for a constant function `f` on a metric with constant scalar curvature.
pub fn w_minus_constant(csc: &CscData, f: f64, tau: f64) -> f64 {
    let n = csc.dim as f64;
    (4.0 * std::f64::consts::PI * tau).powf(-n / 2.0)
        * csc.volume
        * (-f).exp()
        * (tau * csc.scal + f - n)
}

/// `nu_-` on a metric with constant positive scalar curvature, where the minimizer is
/// constant: `log vol + (n/2) log scal - (n/2)(1 + log(2 pi n))`.
pub fn nu_minus_csc(csc: &CscData) -> Result<f64> {
    if !(csc.scal > 0.0) {
        return Err(Error::NonPositiveScalar { scal: csc.scal });
    }
    let n = csc.dim as f64;
    Ok(csc.volume.ln() + 0.5 * n * csc.scal.ln()
        - 0.5 * n * (1.0 + (2.0 * std::f64::consts::PI * n).ln()))
}

pub fn nu_minus_csc_grid(g: &MetricField, tolerance: f64) -> Result<f64> {
    nu_minus_csc(&CscData::from_grid(g, tolerance)?)
}

/// Optimal `tau = n / (2 scal)` for constant `f` on a constant scalar curvature metric.
pub fn tau_csc(csc: &CscData) -> Result<f64> {
    if !(csc.scal > 0.0) {
        return Err(Error::NonPositiveScalar { scal: csc.scal });
    }
    Ok(csc.dim as f64 / (2.0 * csc.scal))
}

/// Minimizing pair `(f, tau)` of `nu_-` on an Einstein metric `Ric = mu g`:
/// `tau = 1/(2 mu)`, `f = log vol - (n/2)(log 2 pi - log mu)`.
pub fn nu_minus_einstein_minimizer(dim: usize, mu: f64, volume: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(Error::NonPositiveMu { mu });
    }
    let n = dim as f64;
    let tau = 1.0 / (2.0 * mu);
    let f = volume.ln() - 0.5 * n * ((2.0 * std::f64::consts::PI).ln() - mu.ln());
    Ok((f, tau))
}

/// Residuals of the shrinker Euler-Lagrange system for constant `f`:
/// `tau(2 Delta f + |df|^2 - scal) - f + n + nu` and
/// `(4 pi tau)^{-n/2} int f e^{-f} dV - n/2 - nu`.
pub fn nu_minus_el_residuals(csc: &CscData, f: f64, tau: f64, nu: f64) -> (f64, f64) {
    let n = csc.dim as f64;
    let r1 = -tau * csc.scal - f + n + nu;
    let mass = (4.0 * std::f64::consts::PI * tau).powf(-n / 2.0) * csc.volume * (-f).exp();
    let r2 = mass * f - n / 2.0 - nu;
    (r1, r2)
}

/// `(4 pi tau)^{-n/2} int e^{-f} dV - 1` for constant `f`.
pub fn nu_minus_constraint(csc: &CscData, f: f64, tau: f64) -> f64 {
    let n = csc.dim as f64;
    (4.0 * std::f64::consts::PI * tau).powf(-n / 2.0) * csc.volume * (-f).exp() - 1.0
}
