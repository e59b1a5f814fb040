//! First variations of the connection, curvature, volume, Hessian and Laplacian,
//! together with a Richardson-extrapolated finite-difference oracle in the metric
//! direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sym_index, sym_len, MetricField, ScalarField, SymTensorField};
use crate::geometry::{self, ConnectionField, RiemannField};
use crate::local::{pack_sym, scalar_jets, sym_jets, LocalGeom, Mat, MetricJets, T3, Z3, Z4, ZM};

/// Linearized curvature in a direction `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureVariation {
    pub riemann: RiemannField,
    pub ricci: SymTensorField,
    pub scal: ScalarField,
}

fn connection_variation_local(lg: &LocalGeom, nh: &T3) -> T3 {
    let n = lg.n;
    let mut low = Z3;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                low[i][j][l] = 0.5 * (nh[i][j][l] + nh[j][i][l] - nh[l][i][j]);
            }
        }
    }
    let mut up = Z3;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += lg.gi[k][l] * low[i][j][l];
                }
                up[k][i][j] = s;
            }
        }
    }
    up
}

/// `G^k_ij = g^{kl} (nabla_i h_jl + nabla_j h_il - nabla_l h_ij) / 2`.
pub fn vary_connection(g: &MetricField, h: &SymTensorField) -> Result<ConnectionField> {
    g.chart().same_as(&h.chart)?;
    let n = g.dim();
    let nodes = g.chart().node_count();
    let jets = MetricJets::new(g);
    let hj = sym_jets(h);
    let mut comps = vec![vec![0.0; nodes]; n * n * n];
    for node in 0..nodes {
        let lg = jets.geom(node);
        let gv = connection_variation_local(&lg, &lg.nabla_sym(&hj.sym(node)));
        for (c, comp) in comps.iter_mut().enumerate() {
            comp[node] = gv[c / (n * n)][(c / n) % n][c % n];
        }
    }
    Ok(ConnectionField { chart: g.chart().clone(), comps })
}

pub fn vary_curvature(g: &MetricField, h: &SymTensorField) -> Result<CurvatureVariation> {
    g.chart().same_as(&h.chart)?;
    let n = g.dim();
    let chart = g.chart().clone();
    let nodes = chart.node_count();
    let jets = MetricJets::new(g);
    let hj = sym_jets(h);
    let mut riem = vec![vec![0.0; nodes]; n.pow(4)];
    let mut ric = Vec::with_capacity(nodes);
    let mut scal = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let lg = jets.geom(node);
        let lh = hj.sym(node);
        let nh = lg.nabla_sym(&lh);
        let dnh = lg.d_nabla_sym(&lh);
        let n2 = lg.nabla2_sym(&nh, &dnh);

        // R^m_{ijk} h_{ml} for the curvature terms of the Riemann variation
        let mut rh = Z4;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            for p in 0..n {
                                s += lg.gi[m][p] * lg.riem[i][j][k][p] * lh.v[m][l];
                            }
                        }
                        rh[i][j][k][l] = s;
                    }
                }
            }
        }
        for (c, comp) in riem.iter_mut().enumerate() {
            let (i, j, k, l) = (c / (n * n * n), (c / (n * n)) % n, (c / n) % n, c % n);
            comp[node] = 0.5
                * (n2[i][k][j][l] + n2[j][l][i][k] - n2[j][k][i][l] - n2[i][l][j][k]
                    + rh[i][j][k][l]
                    - rh[i][j][l][k]);
        }

        let lich = geometry::lichnerowicz_local(&lg, &lh);
        let dh = lg.div_sym(&nh);
        let ddh = lg.d_div_sym(&nh, &dnh);
        let ndh = lg.nabla_form_raw(&dh, &ddh);
        let tj = lg.trace_jet(&lh);
        let ht = lg.hessian(&tj);
        let mut r = ZM;
        for i in 0..n {
            for j in 0..n {
                r[i][j] = 0.5 * lich[i][j] - 0.5 * (ndh[i][j] + ndh[j][i]) - 0.5 * ht[i][j];
            }
        }
        ric.push(r);
        let div_div = -lg.trace(&ndh);
        scal.push(-lg.trace(&ht) + div_div - lg.inner(&lg.ric, &lh.v));
    }
    Ok(CurvatureVariation {
        riemann: RiemannField { chart: chart.clone(), comps: riem },
        ricci: pack_sym(&chart, &ric),
        scal: ScalarField { chart, values: scal },
    })
}

/// Derivative of the volume density: `tr_g h sqrt(det g) / 2`.
pub fn vary_volume(g: &MetricField, h: &SymTensorField) -> Result<ScalarField> {
    let tr = geometry::trace(g, h)?;
    let vd = geometry::volume_density(g);
    Ok(ScalarField {
        chart: g.chart().clone(),
        values: tr.values.iter().zip(&vd.values).map(|(t, v)| 0.5 * t * v).collect(),
    })
}

/// `-G^k_ij d_k f`.
pub fn vary_hessian(g: &MetricField, h: &SymTensorField, f: &ScalarField) -> Result<SymTensorField> {
    g.chart().same_as(&h.chart)?;
    g.chart().same_as(&f.chart)?;
    let n = g.dim();
    let jets = MetricJets::new(g);
    let hj = sym_jets(h);
    let fj = scalar_jets(f);
    let vals: Vec<Mat> = (0..g.chart().node_count())
        .map(|node| {
            let lg = jets.geom(node);
            let gv = connection_variation_local(&lg, &lg.nabla_sym(&hj.sym(node)));
            let lf = fj.scalar(node);
            let mut r = ZM;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        r[i][j] -= gv[k][i][j] * lf.d[k];
                    }
                }
            }
            r
        })
        .collect();
    Ok(pack_sym(g.chart(), &vals))
}

/// `<h, Hess f> - <delta h + d tr h / 2, df>`.
pub fn vary_laplacian(g: &MetricField, h: &SymTensorField, f: &ScalarField) -> Result<ScalarField> {
    g.chart().same_as(&h.chart)?;
    g.chart().same_as(&f.chart)?;
    let jets = MetricJets::new(g);
    let hj = sym_jets(h);
    let fj = scalar_jets(f);
    let values = (0..g.chart().node_count())
        .map(|node| {
            let lg = jets.geom(node);
            let lh = hj.sym(node);
            let lf = fj.scalar(node);
            let dh = lg.div_sym(&lg.nabla_sym(&lh));
            let tj = lg.trace_jet(&lh);
            let mut w = [0.0; 4];
            for (k, wk) in w.iter_mut().enumerate().take(lg.n) {
                *wk = dh[k] + 0.5 * tj.d[k];
            }
            lg.inner(&lh.v, &lg.hessian(&lf)) - lg.inner_form(&w, &lf.d)
        })
        .collect();
    Ok(ScalarField { chart: g.chart().clone(), values })
}

/// Richardson-extrapolated finite-difference derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: Vec<f64>,
    /// Base steps `t0, t0/2, t0/4`.
    pub step_sequence: Vec<f64>,
    /// Unextrapolated stencil values at each base step.
    pub level_values: Vec<Vec<f64>>,
    /// `log2` of the ratio of successive level differences; `None` when both
    /// differences sit at roundoff.
    pub convergence_order: Option<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Fourth-order central stencil for the `k`-th derivative at `0`, as `(offset, weight)`
/// pairs; the result is divided by `t^k`.
fn stencil(k: usize) -> Result<&'static [(i32, f64)]> {
    match k {
        1 => Ok(&[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)]),
        2 => Ok(&[
            (-2, -1.0 / 12.0),
            (-1, 16.0 / 12.0),
            (0, -30.0 / 12.0),
            (1, 16.0 / 12.0),
            (2, -1.0 / 12.0),
        ]),
        3 => Ok(&[
            (-3, 1.0 / 8.0),
            (-2, -1.0),
            (-1, 13.0 / 8.0),
            (1, -13.0 / 8.0),
            (2, 1.0),
            (3, -1.0 / 8.0),
        ]),
        _ => Err(Error::InvalidInput(format!("derivative order {k} not in 1..=3"))),
    }
}

/// `k`-th derivative of `t -> functional(t)` at `t = 0` from fourth-order central
/// stencils at steps `t0, t0/2, t0/4`, extrapolated in the `t^4, t^6` error terms.
pub fn fd_scalar_path(
    functional: &dyn Fn(f64) -> Result<Vec<f64>>,
    k: usize,
    t0: f64,
) -> Result<FdEstimate> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::InvalidInput(format!("step {t0}")));
    }
    let st = stencil(k)?;
    let steps = [t0, t0 / 2.0, t0 / 4.0];
    let mut cache: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut eval = |t: f64| -> Result<Vec<f64>> {
        if let Some((_, v)) = cache.iter().find(|(s, _)| (s - t).abs() <= 1e-15 * t0) {
            return Ok(v.clone());
        }
        let v = functional(t)?;
        cache.push((t, v.clone()));
        Ok(v)
    };
    let mut levels = Vec::new();
    for &t in &steps {
        let mut acc: Vec<f64> = Vec::new();
        for &(off, w) in st {
            let v = eval(off as f64 * t)?;
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
        }
        let scale = t.powi(k as i32);
        levels.push(acc.into_iter().map(|a| a / scale).collect::<Vec<f64>>());
    }
    let d1 = diff_norm(&levels[0], &levels[1]);
    let d2 = diff_norm(&levels[1], &levels[2]);
    let mag = norm(&levels[2]).max(1e-300);
    let noise = 1e-11 * mag * (4.0 / t0).max(1.0).powi(k as i32 - 1);
    let convergence_order = if d1 <= noise && d2 <= noise {
        None
    } else {
        if d2 >= d1 {
            return Err(Error::NoisyFunctional(vec![d1, d2]));
        }
        Some((d1 / d2.max(1e-300)).log2())
    };
    let r1: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            levels[i]
                .iter()
                .zip(&levels[i + 1])
                .map(|(a, b)| (16.0 * b - a) / 15.0)
                .collect()
        })
        .collect();
    let value = r1[0].iter().zip(&r1[1]).map(|(a, b)| (64.0 * b - a) / 63.0).collect();
    Ok(FdEstimate { value, step_sequence: steps.to_vec(), level_values: levels, convergence_order })
}

/// Directional derivative of a metric functional `F(g + t h)` at `t = 0`.
pub fn fd_directional(
    functional: &dyn Fn(&MetricField) -> Result<Vec<f64>>,
    g: &MetricField,
    h: &SymTensorField,
    k: usize,
    t0: f64,
) -> Result<FdEstimate> {
    let path = |t: f64| -> Result<Vec<f64>> { functional(&g.perturbed(t, h)?) };
    fd_scalar_path(&path, k, t0)
}

/// Base step for perturbing `g` along `h`: `rel` times the ratio of field sizes, capped so
/// that every stencil point stays comfortably positive definite.
pub fn default_step(g: &MetricField, h: &SymTensorField, rel: f64) -> f64 {
    let hs = h.max_abs().max(1e-300);
    let gs = g.tensor().max_abs();
    let cap = 0.1 * g.min_eigenvalue() / hs / 3.0;
    (rel * gs / hs).min(cap)
}

/// Which linearization to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    Connection,
    Riemann,
    Ricci,
    Scal,
    Volume,
    Hessian,
    Laplacian,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::Connection,
        Quantity::Riemann,
        Quantity::Ricci,
        Quantity::Scal,
        Quantity::Volume,
        Quantity::Hessian,
        Quantity::Laplacian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Connection => "connection",
            Quantity::Riemann => "riemann",
            Quantity::Ricci => "ricci",
            Quantity::Scal => "scal",
            Quantity::Volume => "volume",
            Quantity::Hessian => "hessian",
            Quantity::Laplacian => "laplacian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub quantity: Quantity,
    pub analytic_norm: f64,
    pub fd_norm: f64,
    pub rel_error: f64,
    pub step_sequence: Vec<f64>,
    pub convergence_order_estimate: Option<f64>,
}

fn sym_flat(h: &SymTensorField) -> Vec<f64> {
    let n = h.chart.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            out.extend_from_slice(h.get(i, j));
        }
    }
    out
}

fn evaluate(q: Quantity, g: &MetricField, f: &ScalarField) -> Result<Vec<f64>> {
    Ok(match q {
        Quantity::Connection => geometry::christoffel(g).comps.concat(),
        Quantity::Riemann => geometry::curvature(g).riemann.comps.concat(),
        Quantity::Ricci => sym_flat(&geometry::ricci(g)),
        Quantity::Scal => geometry::scalar_curvature(g).values,
        Quantity::Volume => geometry::volume_density(g).values,
        Quantity::Hessian => sym_flat(&geometry::hessian(g, f)?),
        Quantity::Laplacian => geometry::laplacian(g, f)?.values,
    })
}

pub fn analytic_variation(
    q: Quantity,
    g: &MetricField,
    h: &SymTensorField,
    f: &ScalarField,
) -> Result<Vec<f64>> {
    Ok(match q {
        Quantity::Connection => vary_connection(g, h)?.comps.concat(),
        Quantity::Riemann => vary_curvature(g, h)?.riemann.comps.concat(),
        Quantity::Ricci => sym_flat(&vary_curvature(g, h)?.ricci),
        Quantity::Scal => vary_curvature(g, h)?.scal.values,
        Quantity::Volume => vary_volume(g, h)?.values,
        Quantity::Hessian => sym_flat(&vary_hessian(g, h, f)?),
        Quantity::Laplacian => vary_laplacian(g, h, f)?.values,
    })
}

/// Compares an analytic linearization with the finite-difference oracle.
pub fn verify_variation(
    q: Quantity,
    g: &MetricField,
    h: &SymTensorField,
    f: &ScalarField,
    t0: f64,
) -> Result<VariationReport> {
    let analytic = analytic_variation(q, g, h, f)?;
    let fd = fd_directional(&|m: &MetricField| evaluate(q, m, f), g, h, 1, t0)?;
    let fd_norm = norm(&fd.value);
    let analytic_norm = norm(&analytic);
    let scale = fd_norm.max(analytic_norm).max(1e-300);
    Ok(VariationReport {
        quantity: q,
        analytic_norm,
        fd_norm,
        rel_error: diff_norm(&analytic, &fd.value) / scale,
        step_sequence: fd.step_sequence,
        convergence_order_estimate: fd.convergence_order,
    })
}

pub fn verify_all(
    g: &MetricField,
    h: &SymTensorField,
    f: &ScalarField,
    rel_step: f64,
) -> Result<Vec<VariationReport>> {
    let t0 = default_step(g, h, rel_step);
    Quantity::ALL.iter().map(|&q| verify_variation(q, g, h, f, t0)).collect()
}

/// Second derivatives at `t = 0` of `Ric` and `scal` along the conformal curve `(1 + t v) g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalSecondVariation {
    /// Difference quotient in `t` of the analytic first variation along the curve.
    pub ricci: SymTensorField,
    pub scal: ScalarField,
    /// Einstein-background closed forms, when an Einstein constant is supplied.
    pub ricci_closed: Option<SymTensorField>,
    pub scal_closed: Option<ScalarField>,
    pub convergence_order: Option<f64>,
}

/// `Ric''` and `scal''` along `g_t = (1 + t v) g`. The curve has constant velocity `v g`, so
/// both are `d/dt` of the first variation at `g_t` in direction `v g`.
///
/// With `einstein_constant = Some(mu)` the background must satisfy `Ric = mu g` (relative max
/// deviation `1e-6`), and the pointwise closed forms
/// `Ric'' = (n - 2) v Hess v + 3(n/2 - 1) dv(x)dv - (v Delta v + (n/2 - 2)|dv|^2) g` and
/// `scal'' = 2 mu n v^2 - 4(n - 1) v Delta v + (n - 1)(6 - n)/2 |dv|^2` are returned alongside,
/// with `Delta` the nonnegative Laplacian. For `Delta v = 2 mu v` the first becomes
/// `-(n/2 - 2)|dv|^2 g - 2 mu v^2 g + 3(n/2 - 1) dv(x)dv + (n - 2) v Hess v`, and the second
/// equals `-(n - 1)(n/2 + 1)|dv|^2 + 2 mu n v^2` minus the exact divergence `2(n - 1) Delta(v^2)`.
pub fn conformal_second_variations(
    g: &MetricField,
    v: &ScalarField,
    einstein_constant: Option<f64>,
) -> Result<ConformalSecondVariation> {
    g.chart().same_as(&v.chart)?;
    let n = g.dim();
    let h = g.tensor().mul_scalar(v)?;
    let shape = sym_len(n);
    let (ricci, scal, convergence_order) = if h.max_abs() == 0.0 {
        (SymTensorField::zeros(g.chart()), ScalarField::constant(g.chart(), 0.0), None)
    } else {
        let path = |t: f64| -> Result<Vec<f64>> {
            let cv = vary_curvature(&g.perturbed(t, &h)?, &h)?;
            let mut out = cv.ricci.comps.concat();
            out.extend_from_slice(&cv.scal.values);
            Ok(out)
        };
        let fd = fd_scalar_path(&path, 1, default_step(g, &h, 1e-2))?;
        let nodes = g.chart().node_count();
        let comps: Vec<Vec<f64>> = fd.value.chunks(nodes).map(|c| c.to_vec()).collect();
        let ricci = SymTensorField::new(g.chart().clone(), comps[..shape].to_vec())?;
        let scal = ScalarField::new(g.chart().clone(), comps[shape].clone())?;
        (ricci, scal, fd.convergence_order)
    };

    let (ricci_closed, scal_closed) = match einstein_constant {
        None => (None, None),
        Some(mu) => {
            let ric = geometry::ricci(g);
            let dev = ric.axpy(-mu, g.tensor())?.max_abs();
            let scale = ric.max_abs().max(mu.abs() * g.tensor().max_abs()).max(1.0);
            if dev > 1e-6 * scale {
                return Err(Error::NonEinsteinBackgroundForClosedForm(format!(
                    "max |Ric - mu g| = {dev:e} for mu = {mu}"
                )));
            }
            let nf = n as f64;
            let grad_sq = geometry::gradient_norm_sq(g, v)?;
            let hess = geometry::hessian(g, v)?;
            let dv = geometry::differential(v);
            let lap = geometry::laplacian(g, v)?;
            let nodes = g.chart().node_count();
            let mut comps = vec![vec![0.0; nodes]; shape];
            for i in 0..n {
                for j in i..n {
                    let c = &mut comps[sym_index(n, i, j)];
                    let gij = g.tensor().get(i, j);
                    let hij = hess.get(i, j);
                    for k in 0..nodes {
                        let vk = v.values[k];
                        c[k] = (-(nf / 2.0 - 2.0) * grad_sq.values[k] - vk * lap.values[k]) * gij[k]
                            + 3.0 * (nf / 2.0 - 1.0) * dv.comps[i][k] * dv.comps[j][k]
                            + (nf - 2.0) * vk * hij[k];
                    }
                }
            }
            let scal_closed: Vec<f64> = (0..nodes)
                .map(|k| {
                    let vk = v.values[k];
                    2.0 * mu * nf * vk * vk - 4.0 * (nf - 1.0) * vk * lap.values[k]
                        + (nf - 1.0) * (6.0 - nf) / 2.0 * grad_sq.values[k]
                })
                .collect();
            (
                Some(SymTensorField::new(g.chart().clone(), comps)?),
                Some(ScalarField::new(g.chart().clone(), scal_closed)?),
            )
        }
    };
    Ok(ConformalSecondVariation { ricci, scal, ricci_closed, scal_closed, convergence_order })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_paths_are_exact() {
        let p = |t: f64| Ok(vec![1.0 + 2.0 * t - 3.0 * t * t, t * t * t]);
        let d1 = fd_scalar_path(&p, 1, 0.1).unwrap();
        assert!((d1.value[0] - 2.0).abs() < 1e-12 && d1.value[1].abs() < 1e-12);
        let d2 = fd_scalar_path(&p, 2, 0.1).unwrap();
        assert!((d2.value[0] + 6.0).abs() < 1e-10);
        let d3 = fd_scalar_path(&p, 3, 0.1).unwrap();
        assert!((d3.value[1] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn smooth_path_converges_at_fourth_order() {
        let p = |t: f64| Ok(vec![(1.3 * t).exp()]);
        let d = fd_scalar_path(&p, 1, 0.2).unwrap();
        assert!((d.value[0] - 1.3).abs() < 1e-11);
        let order = d.convergence_order.unwrap();
        assert!((order - 4.0).abs() < 0.2, "{order}");
    }

    #[test]
    fn noise_is_detected() {
        let p = |t: f64| Ok(vec![t + 1e-6 * (std::f64::consts::TAU * t / 1e-2).sin()]);
        assert!(matches!(fd_scalar_path(&p, 1, 1e-2), Err(Error::NoisyFunctional(_))));
    }
}
