//! Periodic rectangular charts and the finite-difference stencils acting on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of grid nodes.
pub const MAX_NODES: usize = 1 << 22;
/// Smallest supported resolution along any axis.
pub const MIN_RESOLUTION: usize = 8;

/// Accuracy order of the central stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FdOrder {
    Second,
    #[default]
    Fourth,
    Sixth,
    Eighth,
}

impl FdOrder {
    pub fn from_order(p: usize) -> Result<Self> {
        match p {
            2 => Ok(FdOrder::Second),
            4 => Ok(FdOrder::Fourth),
            6 => Ok(FdOrder::Sixth),
            8 => Ok(FdOrder::Eighth),
            _ => Err(Error::InvalidInput(format!("unsupported stencil order {p}"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
            FdOrder::Sixth => 6,
            FdOrder::Eighth => 8,
        }
    }

    pub fn half_width(self) -> usize {
        self.order() / 2
    }

    /// f'(x) ~ sum_k c_k (f(x + k h) - f(x - k h)) / h, k = 1..
    fn first(self) -> &'static [f64] {
        match self {
            FdOrder::Second => &[0.5],
            FdOrder::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
            FdOrder::Sixth => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
            FdOrder::Eighth => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
        }
    }

    /// f''(x) ~ (c_0 f(x) + sum_k c_k (f(x + k h) + f(x - k h))) / h^2
    fn second(self) -> (f64, &'static [f64]) {
        match self {
            FdOrder::Second => (-2.0, &[1.0]),
            FdOrder::Fourth => (-5.0 / 2.0, &[4.0 / 3.0, -1.0 / 12.0]),
            FdOrder::Sixth => (-49.0 / 18.0, &[3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0]),
            FdOrder::Eighth => (
                -205.0 / 72.0,
                &[8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0],
            ),
        }
    }

    /// f'(x + h/2) ~ sum_k s_k (f(x + k h) - f(x - (k - 1) h)) / h
    fn staggered(self) -> &'static [f64] {
        match self {
            FdOrder::Second => &[1.0],
            FdOrder::Fourth => &[9.0 / 8.0, -1.0 / 24.0],
            FdOrder::Sixth => &[75.0 / 64.0, -25.0 / 384.0, 3.0 / 640.0],
            FdOrder::Eighth => &[
                1225.0 / 1024.0,
                -245.0 / 3072.0,
                49.0 / 5120.0,
                -5.0 / 7168.0,
            ],
        }
    }

    /// f(x + h/2) ~ sum_k w_k (f(x + k h) + f(x - (k - 1) h))
    fn midpoint(self) -> &'static [f64] {
        match self {
            FdOrder::Second => &[0.5],
            FdOrder::Fourth => &[9.0 / 16.0, -1.0 / 16.0],
            FdOrder::Sixth => &[75.0 / 128.0, -25.0 / 256.0, 3.0 / 256.0],
            FdOrder::Eighth => &[
                1225.0 / 2048.0,
                -245.0 / 2048.0,
                49.0 / 2048.0,
                -5.0 / 2048.0,
            ],
        }
    }
}

/// A periodic box `[0, L_1) x ... x [0, L_n)` sampled on a uniform grid.
///
/// Nodes are stored row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridChart {
    dim: usize,
    resolution: Vec<usize>,
    lengths: Vec<f64>,
    #[serde(default)]
    stencil: FdOrder,
}

impl GridChart {
    pub fn new(resolution: Vec<usize>, lengths: Vec<f64>, stencil: FdOrder) -> Result<Self> {
        let dim = resolution.len();
        if !(2..=4).contains(&dim) {
            return Err(Error::InvalidInput(format!("dimension {dim} outside 2..=4")));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidInput("one box length per axis required".into()));
        }
        for (axis, (&n, &l)) in resolution.iter().zip(&lengths).enumerate() {
            if n < MIN_RESOLUTION {
                return Err(Error::ResolutionTooCoarse {
                    axis,
                    resolution: n,
                    half_width: stencil.half_width(),
                });
            }
            if n < 2 * stencil.half_width() + 1 {
                return Err(Error::ResolutionTooCoarse {
                    axis,
                    resolution: n,
                    half_width: stencil.half_width(),
                });
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidInput(format!("box length {l} along axis {axis}")));
            }
        }
        let nodes = resolution
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&m| m <= MAX_NODES)
            .ok_or_else(|| Error::InvalidInput(format!("more than {MAX_NODES} nodes")))?;
        debug_assert!(nodes > 0);
        Ok(GridChart { dim, resolution, lengths, stencil })
    }

    /// Cube `[0, length)^dim` with `resolution` nodes per axis and fourth-order stencils.
    pub fn cube(dim: usize, resolution: usize, length: f64) -> Result<Self> {
        Self::new(vec![resolution; dim], vec![length; dim], FdOrder::Fourth)
    }

    pub fn with_stencil(&self, stencil: FdOrder) -> Result<Self> {
        Self::new(self.resolution.clone(), self.lengths.clone(), stencil)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn stencil(&self) -> FdOrder {
        self.stencil
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.resolution[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Coordinate volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn box_volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..].iter().product()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut rest = node;
        for axis in (0..self.dim).rev() {
            let n = self.resolution[axis];
            out[axis] = (rest % n) as f64 * self.spacing(axis);
            rest /= n;
        }
        out
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.node_count()).map(|i| f(&self.coords(i))).collect()
    }

    /// Applies a periodic 1-D line operator along `axis`.
    fn along_axis(&self, axis: usize, f: &[f64], op: impl Fn(&[f64], &mut [f64])) -> Vec<f64> {
        assert_eq!(f.len(), self.node_count());
        let n = self.resolution[axis];
        let stride = self.stride(axis);
        let block = stride * n;
        let mut out = vec![0.0; f.len()];
        let mut line = vec![0.0; n];
        let mut res = vec![0.0; n];
        for outer in (0..f.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = f[base + k * stride];
                }
                op(&line, &mut res);
                for (k, v) in res.iter().enumerate() {
                    out[base + k * stride] = *v;
                }
            }
        }
        out
    }

    /// Central first derivative along `axis`.
    pub fn d1(&self, axis: usize, f: &[f64]) -> Vec<f64> {
        let c = self.stencil.first();
        let h = self.spacing(axis);
        self.along_axis(axis, f, |line, out| {
            let n = line.len();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, ck) in c.iter().enumerate() {
                    let k = k + 1;
                    acc += ck * (line[(i + k) % n] - line[(i + n - k) % n]);
                }
                *o = acc / h;
            }
        })
    }

    /// Compact central second derivative along `axis`.
    pub fn d2(&self, axis: usize, f: &[f64]) -> Vec<f64> {
        let (c0, c) = self.stencil.second();
        let h2 = self.spacing(axis).powi(2);
        self.along_axis(axis, f, |line, out| {
            let n = line.len();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = c0 * line[i];
                for (k, ck) in c.iter().enumerate() {
                    let k = k + 1;
                    acc += ck * (line[(i + k) % n] + line[(i + n - k) % n]);
                }
                *o = acc / h2;
            }
        })
    }

    /// Second derivative in the pair of axes `(a, b)`: compact when `a == b`, otherwise `d1 d1`.
    pub fn d_pair(&self, a: usize, b: usize, f: &[f64]) -> Vec<f64> {
        if a == b {
            self.d2(a, f)
        } else {
            self.d1(a, &self.d1(b, f))
        }
    }

    /// Staggered derivative: entry `i` approximates the derivative at `x_i + h/2`.
    pub fn stagger_d(&self, axis: usize, f: &[f64]) -> Vec<f64> {
        let s = self.stencil.staggered();
        let h = self.spacing(axis);
        self.along_axis(axis, f, |line, out| {
            let n = line.len();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, sk) in s.iter().enumerate() {
                    let k = k + 1;
                    acc += sk * (line[(i + k) % n] - line[(i + n + 1 - k) % n]);
                }
                *o = acc / h;
            }
        })
    }

    /// Transpose of [`GridChart::stagger_d`] with respect to the Euclidean product.
    pub fn stagger_d_adjoint(&self, axis: usize, u: &[f64]) -> Vec<f64> {
        let s = self.stencil.staggered();
        let h = self.spacing(axis);
        self.along_axis(axis, u, |line, out| {
            let n = line.len();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, sk) in s.iter().enumerate() {
                    let k = k + 1;
                    acc += sk * (line[(i + n - k) % n] - line[(i + k - 1) % n]);
                }
                *o = acc / h;
            }
        })
    }

    /// Interpolation to half nodes: entry `i` approximates the value at `x_i + h/2`.
    pub fn midpoint(&self, axis: usize, f: &[f64]) -> Vec<f64> {
        let w = self.stencil.midpoint();
        self.along_axis(axis, f, |line, out| {
            let n = line.len();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    let k = k + 1;
                    acc += wk * (line[(i + k) % n] + line[(i + n + 1 - k) % n]);
                }
                *o = acc;
            }
        })
    }

    /// Fourier symbol of the staggered derivative squared, `|S(theta)|^2 h^2`, for
    /// the discrete wavenumber index `m` along `axis`.
    pub fn stagger_symbol_sq(&self, axis: usize, m: usize) -> f64 {
        let n = self.resolution[axis] as f64;
        let theta = 2.0 * std::f64::consts::PI * m as f64 / n;
        let s = self.stencil.staggered();
        let mut acc = 0.0;
        for (k, sk) in s.iter().enumerate() {
            acc += 2.0 * sk * ((k as f64 + 0.5) * theta).sin();
        }
        acc * acc / self.spacing(axis).powi(2)
    }

    pub fn same_as(&self, other: &GridChart) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ChartMismatch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_hit_their_order() {
        for order in [FdOrder::Second, FdOrder::Fourth, FdOrder::Sixth, FdOrder::Eighth] {
            let p = order.order() as f64;
            let mut errs = Vec::new();
            for n in [16usize, 32] {
                let chart = GridChart::new(vec![n, 9], vec![2.0, 1.0], order).unwrap();
                let tau = std::f64::consts::TAU;
                let f = chart.sample(|x| (tau * x[0] / 2.0).sin());
                let d = chart.d1(0, &f);
                let dd = chart.d2(0, &f);
                let s = chart.stagger_d(0, &f);
                let mid = chart.midpoint(0, &f);
                let h = chart.spacing(0);
                let mut e = [0.0f64; 4];
                for i in 0..chart.node_count() {
                    let x = chart.coords(i)[0];
                    let k = tau / 2.0;
                    e[0] = e[0].max((d[i] - k * (k * x).cos()).abs());
                    e[1] = e[1].max((dd[i] + k * k * (k * x).sin()).abs());
                    e[2] = e[2].max((s[i] - k * (k * (x + h / 2.0)).cos()).abs());
                    e[3] = e[3].max((mid[i] - (k * (x + h / 2.0)).sin()).abs());
                }
                errs.push(e);
            }
            for j in 0..4 {
                let rate = (errs[0][j] / errs[1][j]).log2();
                assert!((rate - p).abs() < 0.3, "order {p} operator {j} rate {rate}");
            }
        }
    }

    #[test]
    fn stagger_adjoint_is_transpose() {
        let chart = GridChart::new(vec![9, 8], vec![1.0, 1.3], FdOrder::Sixth).unwrap();
        let f: Vec<f64> = (0..chart.node_count()).map(|i| ((i * 7919) % 13) as f64).collect();
        let u: Vec<f64> = (0..chart.node_count()).map(|i| ((i * 104729) % 11) as f64).collect();
        let lhs: f64 = chart.stagger_d(0, &f).iter().zip(&u).map(|(a, b)| a * b).sum();
        let rhs: f64 = chart.stagger_d_adjoint(0, &u).iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn rejects_bad_charts() {
        assert!(matches!(
            GridChart::cube(3, 6, 1.0),
            Err(Error::ResolutionTooCoarse { .. })
        ));
        assert!(GridChart::new(vec![8, 8, 8, 8, 8], vec![1.0; 5], FdOrder::Fourth).is_err());
        assert!(GridChart::new(vec![8, 8], vec![1.0, -1.0], FdOrder::Fourth).is_err());
        assert!(GridChart::new(vec![8, 8], vec![1.0, 1.0], FdOrder::Eighth).is_err());
        assert!(GridChart::new(vec![9, 9], vec![1.0, 1.0], FdOrder::Eighth).is_ok());
    }
}
