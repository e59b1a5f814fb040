//! Symmetric weak-form Laplacian, preconditioned conjugate gradients and the
//! smallest eigenpairs of Schroedinger operators `-a Delta + V`.
//!
//! The weak form uses staggered derivatives for the diagonal coefficients, so its
//! null space on a connected grid is exactly the constants. It is self-adjoint with
//! respect to the mass `m_i = sqrt(det g)` at each node.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField};
use crate::grid::GridChart;
use crate::local::{inverse_det, ZM};

/// Stiffness of the Dirichlet energy `int |df|^2_g dV`, discretized.
#[derive(Debug, Clone)]
pub struct WeakLaplacian {
    chart: GridChart,
    mass: Vec<f64>,
    /// `mid(sqrt g g^{ii})` at half nodes along axis `i`.
    diag: Vec<Vec<f64>>,
    /// `(i, j, sqrt g g^{ij})` for `i != j`.
    off: Vec<(usize, usize, Vec<f64>)>,
    mean_diag: Vec<f64>,
    mean_mass: f64,
}

impl WeakLaplacian {
    pub fn new(g: &MetricField) -> Self {
        let chart = g.chart().clone();
        let n = chart.dim();
        let nodes = chart.node_count();
        let mut coef = vec![vec![0.0; nodes]; n * n];
        let mut mass = vec![0.0; nodes];
        for node in 0..nodes {
            let mut m = ZM;
            for i in 0..n {
                for j in 0..n {
                    m[i][j] = g.tensor().at(node, i, j);
                }
            }
            let (gi, det) = inverse_det(n, &m);
            let sq = det.sqrt();
            mass[node] = sq;
            for i in 0..n {
                for j in 0..n {
                    coef[i * n + j][node] = sq * gi[i][j];
                }
            }
        }
        let diag: Vec<Vec<f64>> = (0..n).map(|i| chart.midpoint(i, &coef[i * n + i])).collect();
        let mut off = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off.push((i, j, coef[i * n + j].clone()));
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mean_diag = diag.iter().map(|d| mean(d)).collect();
        let mean_mass = mean(&mass);
        WeakLaplacian { chart, mass, diag, off, mean_diag, mean_mass }
    }

    pub fn chart(&self) -> &GridChart {
        &self.chart
    }

    /// Node masses `sqrt(det g)`; multiply by the cell volume for quadrature weights.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `K f`, with `f^T K f` the Dirichlet energy divided by the cell volume.
    pub fn stiffness(&self, f: &[f64]) -> Vec<f64> {
        let chart = &self.chart;
        let mut out = vec![0.0; f.len()];
        for (i, a) in self.diag.iter().enumerate() {
            let s: Vec<f64> = chart.stagger_d(i, f).iter().zip(a).map(|(x, c)| x * c).collect();
            for (o, v) in out.iter_mut().zip(chart.stagger_d_adjoint(i, &s)) {
                *o += v;
            }
        }
        if !self.off.is_empty() {
            let df: Vec<Vec<f64>> = (0..chart.dim()).map(|j| chart.d1(j, f)).collect();
            for (i, j, c) in &self.off {
                let t: Vec<f64> = df[*j].iter().zip(c).map(|(x, y)| x * y).collect();
                for (o, v) in out.iter_mut().zip(chart.d1(*i, &t)) {
                    *o -= v;
                }
            }
        }
        out
    }

    /// Nonnegative Laplacian `K f / m`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.stiffness(f).iter().zip(&self.mass).map(|(k, m)| k / m).collect()
    }

    /// Dirichlet energy `int |df|^2 dV`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        let k = self.stiffness(f);
        k.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() * self.chart.cell_volume()
    }
}

/// Inverse of `alpha K_flat + beta diag(mean mass)` by FFT, where `K_flat` has the
/// averaged diagonal coefficients.
pub struct FlatPreconditioner {
    dims: Vec<usize>,
    symbol: Vec<f64>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl FlatPreconditioner {
    pub fn new(lap: &WeakLaplacian, alpha: f64, beta: f64) -> Self {
        let chart = lap.chart();
        let dims = chart.resolution().to_vec();
        let n = dims.len();
        let nodes = chart.node_count();
        let mut symbol = vec![0.0; nodes];
        let per_axis: Vec<Vec<f64>> = (0..n)
            .map(|a| (0..dims[a]).map(|m| chart.stagger_symbol_sq(a, m)).collect())
            .collect();
        for (idx, s) in symbol.iter_mut().enumerate() {
            let mut rest = idx;
            let mut acc = 0.0;
            for a in (0..n).rev() {
                let m = rest % dims[a];
                rest /= dims[a];
                acc += lap.mean_diag[a] * per_axis[a][m];
            }
            *s = alpha * acc + beta * lap.mean_mass;
        }
        let mut planner = FftPlanner::new();
        let fwd = dims.iter().map(|&d| planner.plan_fft_forward(d)).collect();
        let inv = dims.iter().map(|&d| planner.plan_fft_inverse(d)).collect();
        FlatPreconditioner { dims, symbol, fwd, inv }
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let n = self.dims.len();
        for a in 0..n {
            let len = self.dims[a];
            let stride: usize = self.dims[a + 1..].iter().product();
            let block = stride * len;
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            for outer in (0..buf.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for k in 0..len {
                        line[k] = buf[base + k * stride];
                    }
                    plans[a].process(&mut line);
                    for k in 0..len {
                        buf[base + k * stride] = line[k];
                    }
                }
            }
        }
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b /= *s;
        }
        self.transform(&mut buf, &self.inv);
        let scale = 1.0 / buf.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
/// Stops when `|r| <= tol |b|`.
pub fn pcg(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; b.len()], 0));
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; b.len()]);
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let rn = dot(&r, &r).sqrt();
        if rn <= tol * bnorm {
            return Ok((x, it));
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence { solver: "pcg (indefinite)", iterations: it, residual: rn / bnorm });
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = dot(&r, &r).sqrt();
    if rn <= tol * bnorm {
        return Ok((x, max_iter));
    }
    Err(Error::NoConvergence { solver: "pcg", iterations: max_iter, residual: rn / bnorm })
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Eigenfunctions normalized to `int phi^2 dV = 1`.
    pub vectors: Vec<ScalarField>,
    /// `|(-a Delta + V) phi - lambda phi|_{L^2}` for each pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Options for [`eigen_smallest`].
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub count: usize,
    pub tol: f64,
    pub max_krylov: usize,
    pub inner_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { count: 1, tol: 1e-10, max_krylov: 80, inner_tol: 1e-13 }
    }
}

fn check_potential(g: &MetricField, potential: &ScalarField, a: f64) -> Result<()> {
    g.chart().same_as(&potential.chart)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidInput(format!("coefficient a = {a} must be positive")));
    }
    if potential.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("potential is not finite".into()));
    }
    Ok(())
}

/// Smallest eigenpairs of `-a Delta + V` (weak form) by shift-invert Lanczos with full
/// reorthogonalization; inner solves by FFT-preconditioned conjugate gradients.
pub fn eigen_smallest(
    g: &MetricField,
    a: f64,
    potential: &ScalarField,
    opts: EigenOptions,
) -> Result<EigenResult> {
    check_potential(g, potential, a)?;
    let lap = WeakLaplacian::new(g);
    let nodes = g.chart().node_count();
    let k = opts.count.max(1).min(nodes);
    let v = &potential.values;
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmean = v.iter().sum::<f64>() / nodes as f64;
    let sigma = vmin - 1.0;
    let msq: Vec<f64> = lap.mass().iter().map(|m| m.sqrt()).collect();
    // B y = M^{-1/2} (a K + V M) M^{-1/2} y, shifted by sigma
    let shifted = |y: &[f64]| -> Vec<f64> {
        let x: Vec<f64> = y.iter().zip(&msq).map(|(a, b)| a / b).collect();
        let kx = lap.stiffness(&x);
        (0..nodes).map(|i| a * kx[i] / msq[i] + (v[i] - sigma) * y[i]).collect()
    };
    let pre = FlatPreconditioner::new(&lap, a / lap.mean_mass, (vmean - sigma) / lap.mean_mass);
    let precond = |r: &[f64]| -> Vec<f64> { pre.solve(r) };

    let max_m = opts.max_krylov.min(nodes);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q: Vec<f64> = (0..nodes)
        .map(|i| msq[i] * (1.0 + 0.1 * ((i as f64 * 0.618_033_988_75).fract() - 0.5)))
        .collect();
    let qn = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= qn);
    let mut last_residual = f64::NAN;
    for m in 0..max_m {
        basis.push(q.clone());
        let (mut w, _) = pcg(&shifted, &precond, &q, None, opts.inner_tol, 5000)?;
        alpha.push(dot(&w, &q));
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bm = dot(&w, &w).sqrt();
        let exhausted = m + 1 >= max_m || bm < 1e-14;
        if m + 1 >= k {
            let eig = SymmetricEigen::new(tridiag(&alpha, &beta));
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
            let last = alpha.len() - 1;
            let ritz_small = order.iter().take(k).all(|&i| {
                (bm * eig.eigenvectors[(last, i)]).abs() <= 1e-3 * opts.tol * eig.eigenvalues[i].abs()
            });
            if ritz_small || exhausted {
                let mut values = Vec::new();
                let mut vectors = Vec::new();
                let mut residuals = Vec::new();
                for &i in order.iter().take(k) {
                    let lambda = sigma + 1.0 / eig.eigenvalues[i];
                    let mut y = vec![0.0; nodes];
                    for (j, b) in basis.iter().enumerate() {
                        let c = eig.eigenvectors[(j, i)];
                        y.iter_mut().zip(b).for_each(|(x, z)| *x += c * z);
                    }
                    let mut phi: Vec<f64> = y.iter().zip(&msq).map(|(a, b)| a / b).collect();
                    let norm = weighted_norm(&phi, lap.mass(), g.chart().cell_volume());
                    phi.iter_mut().for_each(|p| *p /= norm);
                    if phi.iter().sum::<f64>() < 0.0 {
                        phi.iter_mut().for_each(|p| *p = -*p);
                    }
                    let lp = lap.apply(&phi);
                    let res: Vec<f64> =
                        (0..nodes).map(|j| a * lp[j] + v[j] * phi[j] - lambda * phi[j]).collect();
                    residuals.push(weighted_norm(&res, lap.mass(), g.chart().cell_volume()));
                    values.push(lambda);
                    vectors.push(ScalarField { chart: g.chart().clone(), values: phi });
                }
                let ok = values
                    .iter()
                    .zip(&residuals)
                    .all(|(l, r)| *r <= opts.tol * l.abs().max(1.0));
                last_residual = residuals.iter().copied().fold(0.0, f64::max);
                if ok {
                    return Ok(EigenResult { values, vectors, residuals, iterations: m + 1 });
                }
                if exhausted {
                    break;
                }
            }
        }
        if exhausted {
            break;
        }
        beta.push(bm);
        q = w.iter().map(|x| x / bm).collect();
    }
    Err(Error::NoConvergence { solver: "lanczos", iterations: basis.len(), residual: last_residual })
}

fn weighted_norm(f: &[f64], mass: &[f64], cell: f64) -> f64 {
    (f.iter().zip(mass).map(|(p, m)| p * p * m).sum::<f64>() * cell).sqrt()
}

fn tridiag(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Dense eigen-decomposition of the same weak-form operator; for small grids and as an oracle.
pub fn eigen_dense(g: &MetricField, a: f64, potential: &ScalarField, count: usize) -> Result<Vec<f64>> {
    check_potential(g, potential, a)?;
    let lap = WeakLaplacian::new(g);
    let nodes = g.chart().node_count();
    if nodes > 4096 {
        return Err(Error::InvalidInput(format!("{nodes} nodes too many for a dense solve")));
    }
    let msq: Vec<f64> = lap.mass().iter().map(|m| m.sqrt()).collect();
    let mut b = DMatrix::zeros(nodes, nodes);
    let mut e = vec![0.0; nodes];
    for j in 0..nodes {
        e[j] = 1.0;
        let k = lap.stiffness(&e);
        for i in 0..nodes {
            b[(i, j)] = a * k[i] / (msq[i] * msq[j]);
        }
        b[(j, j)] += potential.values[j];
        e[j] = 0.0;
    }
    let sym = (&b + b.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals.truncate(count);
    Ok(vals)
}
