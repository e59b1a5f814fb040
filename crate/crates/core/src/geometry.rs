//! Connection, curvature and the natural operators of a grid metric.
//!
//! Sign conventions: the Laplacian is nonnegative, `Delta f = -tr Hess f`;
//! `R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]` and `Ric(Y,Z) = tr(X -> R(X,Y)Z)`,
//! so round spheres have positive curvature. `delta` is the formal adjoint of
//! `delta^* w = (nabla w + nabla w^T) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{MetricField, OneFormField, ScalarField, SymTensorField};
use crate::grid::GridChart;
use crate::local::{
    form_jets, pack_form, pack_sym, scalar_jets, sym_jets, LocalGeom, Mat, MetricJets, M, ZM,
};

/// Christoffel symbols `Gamma^k_ij`, stored at `k n^2 + i n + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionField {
    pub chart: GridChart,
    pub comps: Vec<Vec<f64>>,
}

impl ConnectionField {
    pub fn get(&self, k: usize, i: usize, j: usize) -> &[f64] {
        let n = self.chart.dim();
        &self.comps[k * n * n + i * n + j]
    }

    pub fn flat_norm(&self) -> f64 {
        self.comps.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Fully covariant Riemann tensor `R_ijkl = g(R(d_i, d_j) d_k, d_l)`, stored at
/// `((i n + j) n + k) n + l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannField {
    pub chart: GridChart,
    pub comps: Vec<Vec<f64>>,
}

impl RiemannField {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> &[f64] {
        let n = self.chart.dim();
        &self.comps[((i * n + j) * n + k) * n + l]
    }

    pub fn flat_norm(&self) -> f64 {
        self.comps.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePack {
    pub riemann: RiemannField,
    pub ricci: SymTensorField,
    pub scal: ScalarField,
}

/// Fully covariant tensor of arbitrary rank with components at base-`n` multi-indices
/// (first index most significant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    pub chart: GridChart,
    pub rank: usize,
    pub comps: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn new(chart: GridChart, rank: usize, comps: Vec<Vec<f64>>) -> Result<Self> {
        let expected = chart.dim().pow(rank as u32);
        if comps.len() != expected || comps.iter().any(|c| c.len() != chart.node_count()) {
            return Err(Error::InvalidInput("tensor shape mismatch".into()));
        }
        Ok(TensorField { chart, rank, comps })
    }

    pub fn from_sym(h: &SymTensorField) -> Self {
        let n = h.chart.dim();
        let comps = (0..n * n).map(|c| h.get(c / n, c % n).to_vec()).collect();
        TensorField { chart: h.chart.clone(), rank: 2, comps }
    }

    pub fn from_form(w: &OneFormField) -> Self {
        TensorField { chart: w.chart.clone(), rank: 1, comps: w.comps.clone() }
    }
}

fn per_node<T>(g: &MetricField, mut f: impl FnMut(usize, &LocalGeom) -> T) -> Vec<T> {
    let jets = MetricJets::new(g);
    (0..g.chart().node_count()).map(|node| f(node, &jets.geom(node))).collect()
}

fn check(g: &MetricField, chart: &GridChart) -> Result<()> {
    g.chart().same_as(chart)
}

pub fn christoffel(g: &MetricField) -> ConnectionField {
    let n = g.dim();
    let vals = per_node(g, |_, lg| lg.gam);
    let comps = (0..n * n * n)
        .map(|c| {
            let (k, i, j) = (c / (n * n), (c / n) % n, c % n);
            vals.iter().map(|gam| gam[k][i][j]).collect()
        })
        .collect();
    ConnectionField { chart: g.chart().clone(), comps }
}

pub fn curvature(g: &MetricField) -> CurvaturePack {
    let n = g.dim();
    let chart = g.chart().clone();
    let nodes = chart.node_count();
    let mut riem = vec![vec![0.0; nodes]; n.pow(4)];
    let mut ric = Vec::with_capacity(nodes);
    let mut scal = Vec::with_capacity(nodes);
    let jets = MetricJets::new(g);
    for node in 0..nodes {
        let lg = jets.geom(node);
        for (c, comp) in riem.iter_mut().enumerate() {
            let (i, j, k, l) = (c / (n * n * n), (c / (n * n)) % n, (c / n) % n, c % n);
            comp[node] = lg.riem[i][j][k][l];
        }
        ric.push(lg.ric);
        scal.push(lg.scal);
    }
    CurvaturePack {
        riemann: RiemannField { chart: chart.clone(), comps: riem },
        ricci: pack_sym(&chart, &ric),
        scal: ScalarField { chart, values: scal },
    }
}

/// Scalar curvature alone.
pub fn scalar_curvature(g: &MetricField) -> ScalarField {
    ScalarField { chart: g.chart().clone(), values: per_node(g, |_, lg| lg.scal) }
}

pub fn ricci(g: &MetricField) -> SymTensorField {
    pack_sym(g.chart(), &per_node(g, |_, lg| lg.ric))
}

/// Riemann tensor rebuilt from derivatives of the Christoffel symbols,
/// `R^l_ijk = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik`,
/// then lowered on `l`.
pub fn riemann_from_connection(g: &MetricField) -> RiemannField {
    let n = g.dim();
    let nodes = g.chart().node_count();
    let mut comps = vec![vec![0.0; nodes]; n.pow(4)];
    let jets = MetricJets::new(g);
    for node in 0..nodes {
        let lg = jets.geom(node);
        let up = lg.riem_up_from_connection();
        for (c, comp) in comps.iter_mut().enumerate() {
            let (i, j, k, l) = (c / (n * n * n), (c / (n * n)) % n, (c / n) % n, c % n);
            let mut s = 0.0;
            for m in 0..n {
                s += lg.g[l][m] * up[m][i][j][k];
            }
            comp[node] = s;
        }
    }
    RiemannField { chart: g.chart().clone(), comps }
}

/// Covariant derivative of a covariant tensor; the new index comes first.
pub fn covariant_derivative(g: &MetricField, t: &TensorField) -> Result<TensorField> {
    check(g, &t.chart)?;
    let n = g.dim();
    let r = t.rank;
    let chart = g.chart();
    let nodes = chart.node_count();
    let ncomp = n.pow(r as u32);
    let d: Vec<Vec<Vec<f64>>> =
        (0..n).map(|a| t.comps.iter().map(|c| chart.d1(a, c)).collect()).collect();
    let gam = christoffel(g);
    let mut out = vec![vec![0.0; nodes]; n * ncomp];
    let digits = |mut c: usize| {
        let mut idx = vec![0usize; r];
        for s in (0..r).rev() {
            idx[s] = c % n;
            c /= n;
        }
        idx
    };
    for a in 0..n {
        for c in 0..ncomp {
            let idx = digits(c);
            let o = &mut out[a * ncomp + c];
            o.copy_from_slice(&d[a][c]);
            for (slot, &is) in idx.iter().enumerate() {
                for m in 0..n {
                    let mut j = idx.clone();
                    j[slot] = m;
                    let cm = j.iter().fold(0, |acc, &x| acc * n + x);
                    let gm = gam.get(m, a, is);
                    let tm = &t.comps[cm];
                    for node in 0..nodes {
                        o[node] -= gm[node] * tm[node];
                    }
                }
            }
        }
    }
    Ok(TensorField { chart: chart.clone(), rank: r + 1, comps: out })
}

pub fn hessian(g: &MetricField, f: &ScalarField) -> Result<SymTensorField> {
    check(g, &f.chart)?;
    let fj = scalar_jets(f);
    Ok(pack_sym(g.chart(), &per_node(g, |node, lg| lg.hessian(&fj.scalar(node)))))
}

/// Nonnegative Laplacian `-g^{ij} (Hess f)_ij`.
pub fn laplacian(g: &MetricField, f: &ScalarField) -> Result<ScalarField> {
    check(g, &f.chart)?;
    let fj = scalar_jets(f);
    let values = per_node(g, |node, lg| lg.laplacian(&fj.scalar(node)));
    Ok(ScalarField { chart: g.chart().clone(), values })
}

pub fn gradient_norm_sq(g: &MetricField, f: &ScalarField) -> Result<ScalarField> {
    check(g, &f.chart)?;
    let fj = scalar_jets(f);
    let values = per_node(g, |node, lg| {
        let s = fj.scalar(node);
        lg.inner_form(&s.d, &s.d)
    });
    Ok(ScalarField { chart: g.chart().clone(), values })
}

/// Differential of a function as a one-form.
pub fn differential(f: &ScalarField) -> OneFormField {
    let chart = &f.chart;
    let comps = (0..chart.dim()).map(|a| chart.d1(a, &f.values)).collect();
    OneFormField { chart: chart.clone(), comps }
}

/// `(delta h)_j = -g^{ab} nabla_a h_bj`.
pub fn divergence(g: &MetricField, h: &SymTensorField) -> Result<OneFormField> {
    check(g, &h.chart)?;
    let hj = sym_jets(h);
    let vals = per_node(g, |node, lg| lg.div_sym(&lg.nabla_sym(&hj.sym(node))));
    Ok(pack_form(g.chart(), &vals))
}

/// `delta^* w = (nabla w + nabla w^T) / 2`, half the Lie derivative of `g` along `w^#`.
pub fn adjoint_divergence(g: &MetricField, w: &OneFormField) -> Result<SymTensorField> {
    check(g, &w.chart)?;
    let wj = form_jets(w, false);
    Ok(pack_sym(g.chart(), &per_node(g, |node, lg| lg.sym_nabla_form(&wj.one_form(node)))))
}

/// `delta w = -g^{ij} nabla_i w_j`.
pub fn codifferential(g: &MetricField, w: &OneFormField) -> Result<ScalarField> {
    check(g, &w.chart)?;
    let wj = form_jets(w, false);
    let values = per_node(g, |node, lg| lg.div_form(&wj.one_form(node)));
    Ok(ScalarField { chart: g.chart().clone(), values })
}

/// Hodge Laplacian `d delta + delta d` on one-forms, evaluated pointwise through the
/// Weitzenboeck form `nabla^* nabla w + Ric(w)`.
pub fn hodge_laplacian_1form(g: &MetricField, w: &OneFormField) -> Result<OneFormField> {
    check(g, &w.chart)?;
    let n = g.dim();
    let wj = form_jets(w, true);
    let vals = per_node(g, |node, lg| {
        let lw = wj.one_form(node);
        let mut out = lg.rough_laplacian_form(&lw);
        for (j, o) in out.iter_mut().enumerate().take(n) {
            for a in 0..n {
                for b in 0..n {
                    *o += lg.ric[j][a] * lg.gi[a][b] * lw.v[b];
                }
            }
        }
        out
    });
    Ok(pack_form(g.chart(), &vals))
}

/// Exterior derivative of a one-form, `(dw)_ab = d_a w_b - d_b w_a`, as a full rank-2 tensor.
pub fn exterior_derivative_1form(w: &OneFormField) -> TensorField {
    let chart = &w.chart;
    let n = chart.dim();
    let d: Vec<Vec<Vec<f64>>> =
        (0..n).map(|a| w.comps.iter().map(|c| chart.d1(a, c)).collect()).collect();
    let comps = (0..n * n)
        .map(|c| {
            let (a, b) = (c / n, c % n);
            d[a][b].iter().zip(&d[b][a]).map(|(x, y)| x - y).collect()
        })
        .collect();
    TensorField { chart: chart.clone(), rank: 2, comps }
}

/// Codifferential of a two-form in divergence form, `(delta b)_j = -(1/sqrt g) d_i(sqrt g b^i_j)`
/// with the first index raised. Used as an independent route to the Hodge Laplacian.
pub fn codifferential_2form(g: &MetricField, beta: &TensorField) -> Result<OneFormField> {
    check(g, &beta.chart)?;
    let n = g.dim();
    let chart = g.chart();
    let nodes = chart.node_count();
    let jets = MetricJets::new(g);
    let mut raised = vec![vec![0.0; nodes]; n * n];
    let mut sq = vec![0.0; nodes];
    let mut gi_all = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let lg = jets.geom(node);
        sq[node] = lg.sqrt_det;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        s += lg.gi[i][p] * lg.gi[j][q] * beta.comps[p * n + q][node];
                    }
                }
                raised[i * n + j][node] = s * lg.sqrt_det;
            }
        }
        gi_all.push(lg.g);
    }
    let mut up = vec![vec![0.0; nodes]; n];
    for i in 0..n {
        for j in 0..n {
            let d = chart.d1(i, &raised[i * n + j]);
            for node in 0..nodes {
                up[j][node] -= d[node] / sq[node];
            }
        }
    }
    let mut comps = vec![vec![0.0; nodes]; n];
    for node in 0..nodes {
        for k in 0..n {
            for j in 0..n {
                comps[k][node] += gi_all[node][k][j] * up[j][node];
            }
        }
    }
    Ok(OneFormField { chart: chart.clone(), comps })
}

fn sym_operator(
    g: &MetricField,
    h: &SymTensorField,
    f: impl Fn(&LocalGeom, &crate::local::LocalSym) -> Mat,
) -> Result<SymTensorField> {
    check(g, &h.chart)?;
    let hj = sym_jets(h);
    Ok(pack_sym(g.chart(), &per_node(g, |node, lg| f(lg, &hj.sym(node)))))
}

pub(crate) fn rough_laplacian_local(lg: &LocalGeom, h: &crate::local::LocalSym) -> Mat {
    let n = lg.n;
    let nh = lg.nabla_sym(h);
    let dnh = lg.d_nabla_sym(h);
    let n2 = lg.nabla2_sym(&nh, &dnh);
    let mut r = ZM;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s -= lg.gi[a][b] * n2[a][b][i][j];
                }
            }
            r[i][j] = s;
        }
    }
    r
}

pub(crate) fn lichnerowicz_local(lg: &LocalGeom, h: &crate::local::LocalSym) -> Mat {
    let n = lg.n;
    let rough = rough_laplacian_local(lg, h);
    let rc = lg.ric_compose(&h.v);
    let ra = lg.curvature_action(&h.v);
    let mut r = ZM;
    for i in 0..n {
        for j in 0..n {
            r[i][j] = rough[i][j] + rc[i][j] - 2.0 * ra[i][j];
        }
    }
    r
}

/// Rough Laplacian `nabla^* nabla h = -g^{ab} nabla_a nabla_b h`.
pub fn rough_laplacian(g: &MetricField, h: &SymTensorField) -> Result<SymTensorField> {
    sym_operator(g, h, rough_laplacian_local)
}

/// Curvature action on symmetric 2-tensors, `(R h)(X, Y) = sum_i h(R(e_i, X) Y, e_i)`.
pub fn curvature_action(g: &MetricField, h: &SymTensorField) -> Result<SymTensorField> {
    sym_operator(g, h, |lg, lh| lg.curvature_action(&lh.v))
}

/// `Delta_L h = nabla^* nabla h + Ric o h + h o Ric - 2 R h`.
pub fn lichnerowicz(g: &MetricField, h: &SymTensorField) -> Result<SymTensorField> {
    sym_operator(g, h, lichnerowicz_local)
}

/// Einstein operator `Delta_E h = nabla^* nabla h - 2 R h`.
pub fn einstein_operator(g: &MetricField, h: &SymTensorField) -> Result<SymTensorField> {
    sym_operator(g, h, |lg, lh| {
        let n = lg.n;
        let rough = rough_laplacian_local(lg, lh);
        let ra = lg.curvature_action(&lh.v);
        let mut r = ZM;
        for i in 0..n {
            for j in 0..n {
                r[i][j] = rough[i][j] - 2.0 * ra[i][j];
            }
        }
        r
    })
}

pub fn trace(g: &MetricField, h: &SymTensorField) -> Result<ScalarField> {
    check(g, &h.chart)?;
    let hj = crate::local::Jets::new(&h.chart, &h.comps, false);
    let values = per_node(g, |node, lg| lg.trace(&hj.sym(node).v));
    Ok(ScalarField { chart: g.chart().clone(), values })
}

/// Riemannian volume density `sqrt(det g)` at each node.
pub fn volume_density(g: &MetricField) -> ScalarField {
    let n = g.dim();
    let nodes = g.chart().node_count();
    let values = (0..nodes)
        .map(|node| {
            let mut m = ZM;
            for i in 0..n {
                for j in 0..n {
                    m[i][j] = g.tensor().at(node, i, j);
                }
            }
            crate::local::inverse_det(n, &m).1.sqrt()
        })
        .collect();
    ScalarField { chart: g.chart().clone(), values }
}

/// Quadrature weights `sqrt(det g) dV_coord`.
pub fn quadrature_weights(g: &MetricField) -> Vec<f64> {
    let cv = g.chart().cell_volume();
    volume_density(g).values.into_iter().map(|v| v * cv).collect()
}

/// `int f dV_g` by the periodic trapezoidal rule.
pub fn integrate(g: &MetricField, f: &ScalarField) -> Result<f64> {
    check(g, &f.chart)?;
    Ok(quadrature_weights(g).iter().zip(&f.values).map(|(w, v)| w * v).sum())
}

pub fn volume(g: &MetricField) -> f64 {
    quadrature_weights(g).iter().sum()
}

/// Averaging integral `int f dV / vol`.
pub fn average(g: &MetricField, f: &ScalarField) -> Result<f64> {
    Ok(integrate(g, f)? / volume(g))
}

/// Pointwise `<a, b>_g` on symmetric 2-tensors.
pub fn pointwise_inner_sym(
    g: &MetricField,
    a: &SymTensorField,
    b: &SymTensorField,
) -> Result<ScalarField> {
    check(g, &a.chart)?;
    check(g, &b.chart)?;
    let n = g.dim();
    let nodes = g.chart().node_count();
    let gt = g.tensor();
    let mut values = vec![0.0; nodes];
    for (node, v) in values.iter_mut().enumerate() {
        let mut gm = ZM;
        let mut am = ZM;
        let mut bm = ZM;
        for i in 0..n {
            for j in 0..n {
                gm[i][j] = gt.at(node, i, j);
                am[i][j] = a.at(node, i, j);
                bm[i][j] = b.at(node, i, j);
            }
        }
        let gi = crate::local::inverse_det(n, &gm).0;
        let ra = crate::local::mat_mul(n, &crate::local::mat_mul(n, &gi, &am), &gi);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += ra[i][j] * bm[i][j];
            }
        }
        *v = s;
    }
    Ok(ScalarField { chart: g.chart().clone(), values })
}

pub fn pointwise_inner_form(
    g: &MetricField,
    a: &OneFormField,
    b: &OneFormField,
) -> Result<ScalarField> {
    check(g, &a.chart)?;
    check(g, &b.chart)?;
    let n = g.dim();
    let nodes = g.chart().node_count();
    let gt = g.tensor();
    let mut values = vec![0.0; nodes];
    for (node, v) in values.iter_mut().enumerate() {
        let mut gm = ZM;
        for i in 0..n {
            for j in 0..n {
                gm[i][j] = gt.at(node, i, j);
            }
        }
        let gi = crate::local::inverse_det(n, &gm).0;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gi[i][j] * a.comps[i][node] * b.comps[j][node];
            }
        }
        *v = s;
    }
    Ok(ScalarField { chart: g.chart().clone(), values })
}

pub fn l2_inner_sym(g: &MetricField, a: &SymTensorField, b: &SymTensorField) -> Result<f64> {
    integrate(g, &pointwise_inner_sym(g, a, b)?)
}

pub fn l2_inner_form(g: &MetricField, a: &OneFormField, b: &OneFormField) -> Result<f64> {
    integrate(g, &pointwise_inner_form(g, a, b)?)
}

pub fn l2_norm_sym(g: &MetricField, a: &SymTensorField) -> Result<f64> {
    Ok(l2_inner_sym(g, a, a)?.max(0.0).sqrt())
}

pub fn l2_norm_form(g: &MetricField, a: &OneFormField) -> Result<f64> {
    Ok(l2_inner_form(g, a, a)?.max(0.0).sqrt())
}

/// Lower-triangular Cholesky factor `L` with `g = L L^T` at one node; the rows of
/// `L^{-1}` are an orthonormal coframe.
pub fn cholesky_at(g: &MetricField, node: usize) -> Result<[[f64; M]; M]> {
    let n = g.dim();
    let mut l = ZM;
    for i in 0..n {
        for j in 0..=i {
            let mut s = g.tensor().at(node, i, j);
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NonPositiveDefinite {
                        node,
                        min_eigenvalue: s,
                        floor: 0.0,
                    });
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Ricci-DeTurck operator `-2 Ric + L_W g` with `W^k = g^{pq}(Gamma^k_pq - ref Gamma^k_pq)`;
/// the reference defaults to the flat metric of the chart.
pub fn ricci_deturck(g: &MetricField, reference: Option<&MetricField>) -> Result<SymTensorField> {
    let n = g.dim();
    let ref_jets = match reference {
        Some(r) => {
            check(g, r.chart())?;
            Some(MetricJets::new(r))
        }
        None => None,
    };
    let flat = LocalGeom::new(n, &crate::local::LocalSym::identity());
    let vals = per_node(g, |node, lg| {
        let rg = ref_jets.as_ref().map(|j| j.geom(node));
        let (w, dw) = lg.deturck_field(rg.as_ref().unwrap_or(&flat));
        let nw = lg.nabla_form_raw(&w, &dw);
        let mut out = [[0.0; M]; M];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = -2.0 * lg.ric[i][j] + nw[i][j] + nw[j][i];
            }
        }
        out
    });
    Ok(pack_sym(g.chart(), &vals))
}
