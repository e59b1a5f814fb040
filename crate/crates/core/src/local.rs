//! Pointwise 2-jet calculus.
//!
//! Finite differences are applied only to the stored components of input fields,
//! producing their values, first and second derivatives at every node. Every
//! geometric quantity is then a pointwise algebraic function of those jets, so
//! identities that hold for all smooth 2-jets (Riemann symmetries, linearization
//! formulas, trace identities) hold on the grid up to roundoff.

use crate::field::{sym_index, sym_len, MetricField, OneFormField, ScalarField, SymTensorField};
use crate::grid::GridChart;

pub(crate) const M: usize = 4;
pub(crate) type Mat = [[f64; M]; M];
pub(crate) type T3 = [[[f64; M]; M]; M];
pub(crate) type T4 = [[[[f64; M]; M]; M]; M];

pub(crate) const ZM: Mat = [[0.0; M]; M];
pub(crate) const Z3: T3 = [[[0.0; M]; M]; M];
pub(crate) const Z4: T4 = [[[[0.0; M]; M]; M]; M];

/// Index of the pair `(a, b)`, `a <= b`, among second derivatives.
fn pair_index(n: usize, a: usize, b: usize) -> usize {
    sym_index(n, a, b)
}

/// Finite-difference jets of a list of component arrays.
pub(crate) struct Jets {
    n: usize,
    v: Vec<Vec<f64>>,
    d: Vec<Vec<Vec<f64>>>,
    dd: Vec<Vec<Vec<f64>>>,
}

impl Jets {
    pub fn new(chart: &GridChart, comps: &[Vec<f64>], second: bool) -> Self {
        let n = chart.dim();
        let d: Vec<Vec<Vec<f64>>> =
            (0..n).map(|a| comps.iter().map(|c| chart.d1(a, c)).collect()).collect();
        let mut dd = Vec::new();
        if second {
            for a in 0..n {
                for b in a..n {
                    let row: Vec<Vec<f64>> = if a == b {
                        comps.iter().map(|c| chart.d2(a, c)).collect()
                    } else {
                        d[b].iter().map(|db| chart.d1(a, db)).collect()
                    };
                    dd.push(row);
                }
            }
        }
        Jets { n, v: comps.to_vec(), d, dd }
    }

    pub fn has_second(&self) -> bool {
        !self.dd.is_empty()
    }

    pub fn scalar(&self, node: usize) -> LocalScalar {
        let n = self.n;
        let mut s = LocalScalar { d: [0.0; M], dd: ZM };
        for a in 0..n {
            s.d[a] = self.d[a][0][node];
        }
        if self.has_second() {
            for a in 0..n {
                for b in 0..n {
                    s.dd[a][b] = self.dd[pair_index(n, a, b)][0][node];
                }
            }
        }
        s
    }

    pub fn one_form(&self, node: usize) -> LocalOneForm {
        let n = self.n;
        let mut w = LocalOneForm { v: [0.0; M], d: ZM, dd: Z3 };
        for i in 0..n {
            w.v[i] = self.v[i][node];
            for a in 0..n {
                w.d[a][i] = self.d[a][i][node];
                if self.has_second() {
                    for b in 0..n {
                        w.dd[a][b][i] = self.dd[pair_index(n, a, b)][i][node];
                    }
                }
            }
        }
        w
    }

    pub fn sym(&self, node: usize) -> LocalSym {
        let n = self.n;
        let mut h = LocalSym { v: ZM, d: [ZM; M], dd: [[ZM; M]; M] };
        for i in 0..n {
            for j in 0..n {
                let c = sym_index(n, i, j);
                h.v[i][j] = self.v[c][node];
                for a in 0..n {
                    h.d[a][i][j] = self.d[a][c][node];
                }
                if self.has_second() {
                    for a in 0..n {
                        for b in 0..n {
                            h.dd[a][b][i][j] = self.dd[pair_index(n, a, b)][c][node];
                        }
                    }
                }
            }
        }
        h
    }
}

#[derive(Clone, Copy)]
/// First and second derivatives of a scalar at a node.
pub(crate) struct LocalScalar {
    pub d: [f64; M],
    pub dd: Mat,
}

#[derive(Clone, Copy)]
pub(crate) struct LocalOneForm {
    pub v: [f64; M],
    /// `d[a][i] = d_a w_i`
    pub d: Mat,
    /// `dd[a][b][i] = d_a d_b w_i`, zero unless second jets were requested
    pub dd: T3,
}

#[derive(Clone, Copy)]
pub(crate) struct LocalSym {
    pub v: Mat,
    pub d: [Mat; M],
    pub dd: [[Mat; M]; M],
}

impl LocalSym {
    /// Constant identity jet.
    pub fn identity() -> Self {
        let mut v = ZM;
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        LocalSym { v, d: [ZM; M], dd: [[ZM; M]; M] }
    }
}

/// Jets of a metric plus the connection and curvature they determine.
pub(crate) struct LocalGeom {
    pub n: usize,
    pub g: Mat,
    pub gi: Mat,
    pub dg: [Mat; M],
    pub ddg: [[Mat; M]; M],
    pub dgi: [Mat; M],
    pub sqrt_det: f64,
    /// `gam1[i][j][l] = Gamma_{ij,l} = g_{lm} Gamma^m_{ij}`
    pub gam1: T3,
    /// `dgam1[a][i][j][l] = d_a Gamma_{ij,l}`
    pub dgam1: T4,
    /// `gam[k][i][j] = Gamma^k_{ij}`
    pub gam: T3,
    /// `dgam[a][k][i][j] = d_a Gamma^k_{ij}`
    pub dgam: T4,
    /// `riem[i][j][k][l] = g(R(d_i, d_j) d_k, d_l)` with `R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`
    pub riem: T4,
    pub ric: Mat,
    pub scal: f64,
}

pub(crate) fn mat_mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut c = ZM;
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..n {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

/// Inverse and determinant of a small matrix by Gauss-Jordan with partial pivoting.
pub(crate) fn inverse_det(n: usize, a: &Mat) -> (Mat, f64) {
    let mut m = *a;
    let mut inv = ZM;
    for (i, row) in inv.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if piv != col {
            m.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        let ip = 1.0 / p;
        for j in 0..n {
            m[col][j] *= ip;
            inv[col][j] *= ip;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        m[r][j] -= f * m[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    (inv, det)
}

impl LocalGeom {
    pub fn new(n: usize, jet: &LocalSym) -> Self {
        let g = jet.v;
        let (gi, det) = inverse_det(n, &g);
        let dg = jet.d;
        let ddg = jet.dd;
        let mut dgi = [ZM; M];
        for a in 0..n {
            let t = mat_mul(n, &mat_mul(n, &gi, &dg[a]), &gi);
            for i in 0..n {
                for j in 0..n {
                    dgi[a][i][j] = -t[i][j];
                }
            }
        }
        let mut gam1 = Z3;
        let mut dgam1 = Z4;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    gam1[i][j][l] = 0.5 * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    for a in 0..n {
                        dgam1[a][i][j][l] =
                            0.5 * (ddg[a][i][j][l] + ddg[a][j][i][l] - ddg[a][l][i][j]);
                    }
                }
            }
        }
        let mut gam = Z3;
        let mut dgam = Z4;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += gi[k][l] * gam1[i][j][l];
                    }
                    gam[k][i][j] = s;
                    for a in 0..n {
                        let mut t = 0.0;
                        for l in 0..n {
                            t += dgi[a][k][l] * gam1[i][j][l] + gi[k][l] * dgam1[a][i][j][l];
                        }
                        dgam[a][k][i][j] = t;
                    }
                }
            }
        }
        let mut riem = Z4;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut r = 0.5
                            * (ddg[i][k][j][l] - ddg[i][l][j][k] - ddg[j][k][i][l]
                                + ddg[j][l][i][k]);
                        for m in 0..n {
                            r += gam1[j][l][m] * gam[m][i][k] - gam1[i][l][m] * gam[m][j][k];
                        }
                        riem[i][j][k][l] = r;
                    }
                }
            }
        }
        let mut ric = ZM;
        let mut scal = 0.0;
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        s += gi[i][l] * riem[i][j][k][l];
                    }
                }
                ric[j][k] = s;
            }
        }
        for j in 0..n {
            for k in 0..n {
                scal += gi[j][k] * ric[j][k];
            }
        }
        LocalGeom {
            n,
            g,
            gi,
            dg,
            ddg,
            dgi,
            sqrt_det: det.sqrt(),
            gam1,
            dgam1,
            gam,
            dgam,
            riem,
            ric,
            scal,
        }
    }

    /// Second derivatives of the inverse metric.
    pub fn ddgi(&self, a: usize, b: usize) -> Mat {
        let n = self.n;
        let gi = &self.gi;
        let x = mat_mul(n, &mat_mul(n, &self.dg[a], gi), &self.dg[b]);
        let y = mat_mul(n, &mat_mul(n, &self.dg[b], gi), &self.dg[a]);
        let mut s = ZM;
        for i in 0..n {
            for j in 0..n {
                s[i][j] = x[i][j] + y[i][j] - self.ddg[a][b][i][j];
            }
        }
        mat_mul(n, &mat_mul(n, gi, &s), gi)
    }

    /// `g^{ia} g^{jb} a_ij b_ab`
    pub fn inner(&self, a: &Mat, b: &Mat) -> f64 {
        let n = self.n;
        let ra = mat_mul(n, &mat_mul(n, &self.gi, a), &self.gi);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += ra[i][j] * b[i][j];
            }
        }
        s
    }

    pub fn inner_form(&self, a: &[f64; M], b: &[f64; M]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.gi[i][j] * a[i] * b[j];
            }
        }
        s
    }

    pub fn trace(&self, a: &Mat) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.gi[i][j] * a[i][j];
            }
        }
        s
    }

    /// Mixed Riemann tensor `R^l_{ijk}` from the connection jets.
    pub fn riem_up_from_connection(&self) -> T4 {
        let n = self.n;
        let mut r = Z4;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = self.dgam[i][l][j][k] - self.dgam[j][l][i][k];
                        for m in 0..n {
                            s += self.gam[l][i][m] * self.gam[m][j][k]
                                - self.gam[l][j][m] * self.gam[m][i][k];
                        }
                        r[l][i][j][k] = s;
                    }
                }
            }
        }
        r
    }

    pub fn hessian(&self, f: &LocalScalar) -> Mat {
        let n = self.n;
        let mut h = ZM;
        for i in 0..n {
            for j in 0..n {
                let mut s = f.dd[i][j];
                for k in 0..n {
                    s -= self.gam[k][i][j] * f.d[k];
                }
                h[i][j] = s;
            }
        }
        h
    }

    /// Nonnegative Laplacian `-tr Hess f`.
    pub fn laplacian(&self, f: &LocalScalar) -> f64 {
        -self.trace(&self.hessian(f))
    }

    /// `nabla_a w_i`
    pub fn nabla_form(&self, w: &LocalOneForm) -> Mat {
        let n = self.n;
        let mut r = ZM;
        for a in 0..n {
            for i in 0..n {
                let mut s = w.d[a][i];
                for m in 0..n {
                    s -= self.gam[m][a][i] * w.v[m];
                }
                r[a][i] = s;
            }
        }
        r
    }

    /// `(delta^* w)_ij = (nabla_i w_j + nabla_j w_i) / 2`
    pub fn sym_nabla_form(&self, w: &LocalOneForm) -> Mat {
        let n = self.n;
        let nw = self.nabla_form(w);
        let mut r = ZM;
        for i in 0..n {
            for j in 0..n {
                r[i][j] = 0.5 * (nw[i][j] + nw[j][i]);
            }
        }
        r
    }

    /// `(nabla^* nabla w)_j = -g^{ab} (nabla_a nabla w)(d_b, d_j)` from second jets of `w`.
    pub fn rough_laplacian_form(&self, w: &LocalOneForm) -> [f64; M] {
        let n = self.n;
        let nw = self.nabla_form(w);
        let mut out = [0.0; M];
        for (j, o) in out.iter_mut().enumerate().take(n) {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    // d_a (nabla_b w_j)
                    let mut d = w.dd[a][b][j];
                    for m in 0..n {
                        d -= self.dgam[a][m][b][j] * w.v[m] + self.gam[m][b][j] * w.d[a][m];
                    }
                    for m in 0..n {
                        d -= self.gam[m][a][b] * nw[m][j] + self.gam[m][a][j] * nw[b][m];
                    }
                    s -= self.gi[a][b] * d;
                }
            }
            *o = s;
        }
        out
    }

    /// `delta w = -g^{ij} nabla_i w_j`
    pub fn div_form(&self, w: &LocalOneForm) -> f64 {
        -self.trace(&self.nabla_form(w))
    }

    /// `nh[a][i][j] = nabla_a h_ij`
    pub fn nabla_sym(&self, h: &LocalSym) -> T3 {
        let n = self.n;
        let mut r = Z3;
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = h.d[a][i][j];
                    for m in 0..n {
                        s -= self.gam[m][a][i] * h.v[m][j] + self.gam[m][a][j] * h.v[i][m];
                    }
                    r[a][i][j] = s;
                }
            }
        }
        r
    }

    /// `dnh[b][a][i][j] = d_b (nabla_a h_ij)`
    pub fn d_nabla_sym(&self, h: &LocalSym) -> T4 {
        let n = self.n;
        let mut r = Z4;
        for b in 0..n {
            for a in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = h.dd[b][a][i][j];
                        for m in 0..n {
                            s -= self.dgam[b][m][a][i] * h.v[m][j]
                                + self.gam[m][a][i] * h.d[b][m][j]
                                + self.dgam[b][m][a][j] * h.v[i][m]
                                + self.gam[m][a][j] * h.d[b][i][m];
                        }
                        r[b][a][i][j] = s;
                    }
                }
            }
        }
        r
    }

    /// `n2h[b][a][i][j] = (nabla_b nabla h)(d_a, d_i, d_j)`
    pub fn nabla2_sym(&self, nh: &T3, dnh: &T4) -> T4 {
        let n = self.n;
        let mut r = Z4;
        for b in 0..n {
            for a in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = dnh[b][a][i][j];
                        for m in 0..n {
                            s -= self.gam[m][b][a] * nh[m][i][j]
                                + self.gam[m][b][i] * nh[a][m][j]
                                + self.gam[m][b][j] * nh[a][i][m];
                        }
                        r[b][a][i][j] = s;
                    }
                }
            }
        }
        r
    }

    /// `(delta h)_j = -g^{ab} nabla_a h_bj`
    pub fn div_sym(&self, nh: &T3) -> [f64; M] {
        let n = self.n;
        let mut r = [0.0; M];
        for (j, rj) in r.iter_mut().enumerate().take(n) {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s -= self.gi[a][b] * nh[a][b][j];
                }
            }
            *rj = s;
        }
        r
    }

    /// `d_c (delta h)_j`
    pub fn d_div_sym(&self, nh: &T3, dnh: &T4) -> Mat {
        let n = self.n;
        let mut r = ZM;
        for c in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s -= self.dgi[c][a][b] * nh[a][b][j] + self.gi[a][b] * dnh[c][a][b][j];
                    }
                }
                r[c][j] = s;
            }
        }
        r
    }

    /// Covariant derivative of a one-form given its value and partial derivatives.
    pub fn nabla_form_raw(&self, v: &[f64; M], d: &Mat) -> Mat {
        self.nabla_form(&LocalOneForm { v: *v, d: *d, dd: Z3 })
    }

    /// Jet of `tr_g h`.
    pub fn trace_jet(&self, h: &LocalSym) -> LocalScalar {
        let n = self.n;
        let mut t = LocalScalar { d: [0.0; M], dd: ZM };
        let contract = |x: &Mat, y: &Mat| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += x[i][j] * y[i][j];
                }
            }
            s
        };
        for c in 0..n {
            t.d[c] = contract(&self.dgi[c], &h.v) + contract(&self.gi, &h.d[c]);
        }
        for c in 0..n {
            for d in c..n {
                let v = contract(&self.ddgi(c, d), &h.v)
                    + contract(&self.dgi[c], &h.d[d])
                    + contract(&self.dgi[d], &h.d[c])
                    + contract(&self.gi, &h.dd[c][d]);
                t.dd[c][d] = v;
                t.dd[d][c] = v;
            }
        }
        t
    }

    /// `(R h)_jk = g^{ia} g^{ml} R_{ijkl} h_{ma}`
    pub fn curvature_action(&self, h: &Mat) -> Mat {
        let n = self.n;
        let hu = mat_mul(n, &mat_mul(n, &self.gi, h), &self.gi);
        let mut r = ZM;
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        s += self.riem[i][j][k][l] * hu[l][i];
                    }
                }
                r[j][k] = s;
            }
        }
        r
    }

    /// `Ric o h + h o Ric` as endomorphism compositions, lowered.
    pub fn ric_compose(&self, h: &Mat) -> Mat {
        let n = self.n;
        let a = mat_mul(n, &mat_mul(n, &self.ric, &self.gi), h);
        let b = mat_mul(n, &mat_mul(n, h, &self.gi), &self.ric);
        let mut r = ZM;
        for i in 0..n {
            for j in 0..n {
                r[i][j] = a[i][j] + b[i][j];
            }
        }
        r
    }

    /// Connection one-form `W_j = g_jk g^{pq} (Gamma^k_pq - ref Gamma^k_pq)` and its partials.
    pub fn deturck_field(&self, reference: &LocalGeom) -> ([f64; M], Mat) {
        let n = self.n;
        let mut w = [0.0; M];
        let mut dw = ZM;
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..n {
                for q in 0..n {
                    let mut refl = 0.0;
                    for k in 0..n {
                        refl += self.g[j][k] * reference.gam[k][p][q];
                    }
                    s += self.gi[p][q] * (self.gam1[p][q][j] - refl);
                }
            }
            w[j] = s;
            for a in 0..n {
                let mut t = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        let mut refl = 0.0;
                        let mut drefl = 0.0;
                        for k in 0..n {
                            refl += self.g[j][k] * reference.gam[k][p][q];
                            drefl += self.dg[a][j][k] * reference.gam[k][p][q]
                                + self.g[j][k] * reference.dgam[a][k][p][q];
                        }
                        t += self.dgi[a][p][q] * (self.gam1[p][q][j] - refl)
                            + self.gi[p][q] * (self.dgam1[a][p][q][j] - drefl);
                    }
                }
                dw[a][j] = t;
            }
        }
        (w, dw)
    }
}

/// Node-by-node access to the jets of a metric.
pub(crate) struct MetricJets {
    pub n: usize,
    jets: Jets,
}

impl MetricJets {
    pub fn new(g: &MetricField) -> Self {
        MetricJets { n: g.dim(), jets: Jets::new(g.chart(), &g.tensor().comps, true) }
    }

    pub fn geom(&self, node: usize) -> LocalGeom {
        LocalGeom::new(self.n, &self.jets.sym(node))
    }
}

pub(crate) fn sym_jets(h: &SymTensorField) -> Jets {
    Jets::new(&h.chart, &h.comps, true)
}

pub(crate) fn scalar_jets(f: &ScalarField) -> Jets {
    Jets::new(&f.chart, std::slice::from_ref(&f.values), true)
}

pub(crate) fn form_jets(w: &OneFormField, second: bool) -> Jets {
    Jets::new(&w.chart, &w.comps, second)
}

/// Packs pointwise symmetric matrices into a field.
pub(crate) fn pack_sym(chart: &GridChart, vals: &[Mat]) -> SymTensorField {
    let n = chart.dim();
    let mut comps = vec![vec![0.0; vals.len()]; sym_len(n)];
    for (node, m) in vals.iter().enumerate() {
        for i in 0..n {
            for j in i..n {
                comps[sym_index(n, i, j)][node] = 0.5 * (m[i][j] + m[j][i]);
            }
        }
    }
    SymTensorField { chart: chart.clone(), comps }
}

pub(crate) fn pack_form(chart: &GridChart, vals: &[[f64; M]]) -> OneFormField {
    let n = chart.dim();
    let comps = (0..n).map(|i| vals.iter().map(|v| v[i]).collect()).collect();
    OneFormField { chart: chart.clone(), comps }
}
