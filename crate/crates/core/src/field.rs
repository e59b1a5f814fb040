//! Typed tensor fields on a [`GridChart`].
//!
//! Every field stores one `Vec<f64>` of node values per independent component.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridChart;

/// Default lower bound on the pointwise eigenvalues of a metric.
pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-6;

/// Position of `(i, j)` in the packed upper triangle of an `n x n` symmetric matrix.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub chart: GridChart,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(chart: GridChart, values: Vec<f64>) -> Result<Self> {
        if values.len() != chart.node_count() {
            return Err(Error::InvalidInput("scalar field length mismatch".into()));
        }
        Ok(ScalarField { chart, values })
    }

    pub fn constant(chart: &GridChart, c: f64) -> Self {
        ScalarField { values: vec![c; chart.node_count()], chart: chart.clone() }
    }

    pub fn from_fn(chart: &GridChart, f: impl Fn(&[f64]) -> f64) -> Self {
        ScalarField { values: chart.sample(f), chart: chart.clone() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { chart: self.chart.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneFormField {
    pub chart: GridChart,
    /// `comps[i][node]` is the `dx^i` coefficient.
    pub comps: Vec<Vec<f64>>,
}

impl OneFormField {
    pub fn new(chart: GridChart, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != chart.dim() || comps.iter().any(|c| c.len() != chart.node_count()) {
            return Err(Error::InvalidInput("one-form shape mismatch".into()));
        }
        Ok(OneFormField { chart, comps })
    }

    pub fn zeros(chart: &GridChart) -> Self {
        OneFormField { comps: vec![vec![0.0; chart.node_count()]; chart.dim()], chart: chart.clone() }
    }

    pub fn from_fn(chart: &GridChart, f: impl Fn(usize, &[f64]) -> f64) -> Self {
        let comps = (0..chart.dim()).map(|i| chart.sample(|x| f(i, x))).collect();
        OneFormField { chart: chart.clone(), comps }
    }
}

/// Symmetric covariant 2-tensor, components packed by [`sym_index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTensorField {
    pub chart: GridChart,
    pub comps: Vec<Vec<f64>>,
}

impl SymTensorField {
    pub fn new(chart: GridChart, comps: Vec<Vec<f64>>) -> Result<Self> {
        let n = chart.dim();
        if comps.len() != sym_len(n) || comps.iter().any(|c| c.len() != chart.node_count()) {
            return Err(Error::InvalidInput("symmetric tensor shape mismatch".into()));
        }
        Ok(SymTensorField { chart, comps })
    }

    pub fn zeros(chart: &GridChart) -> Self {
        let n = chart.dim();
        SymTensorField { comps: vec![vec![0.0; chart.node_count()]; sym_len(n)], chart: chart.clone() }
    }

    /// `f(i, j, x)` is only called with `i <= j`.
    pub fn from_fn(chart: &GridChart, f: impl Fn(usize, usize, &[f64]) -> f64) -> Self {
        let n = chart.dim();
        let mut comps = Vec::with_capacity(sym_len(n));
        for i in 0..n {
            for j in i..n {
                comps.push(chart.sample(|x| f(i, j, x)));
            }
        }
        SymTensorField { chart: chart.clone(), comps }
    }

    /// The coordinate identity `delta_ij`.
    pub fn identity(chart: &GridChart) -> Self {
        Self::from_fn(chart, |i, j, _| if i == j { 1.0 } else { 0.0 })
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym_index(self.chart.dim(), i, j)]
    }

    pub fn at(&self, node: usize, i: usize, j: usize) -> f64 {
        self.comps[sym_index(self.chart.dim(), i, j)][node]
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SymTensorField) -> Result<Self> {
        self.chart.same_as(&other.chart)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        Ok(SymTensorField { chart: self.chart.clone(), comps })
    }

    pub fn scale(&self, s: f64) -> Self {
        SymTensorField {
            chart: self.chart.clone(),
            comps: self.comps.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(),
        }
    }

    /// Pointwise multiplication by a scalar field.
    pub fn mul_scalar(&self, f: &ScalarField) -> Result<Self> {
        self.chart.same_as(&f.chart)?;
        Ok(SymTensorField {
            chart: self.chart.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().zip(&f.values).map(|(a, b)| a * b).collect())
                .collect(),
        })
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm over all nodes and packed components with off-diagonal weight 2.
    pub fn flat_norm(&self) -> f64 {
        let n = self.chart.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in i..n {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.get(i, j).iter().map(|v| v * v).sum::<f64>();
            }
        }
        acc.sqrt()
    }

    pub fn matrix_at(&self, node: usize) -> DMatrix<f64> {
        let n = self.chart.dim();
        DMatrix::from_fn(n, n, |i, j| self.at(node, i, j))
    }
}

/// A Riemannian metric: a symmetric 2-tensor whose pointwise eigenvalues stay above a floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    tensor: SymTensorField,
}

impl MetricField {
    pub fn new(tensor: SymTensorField) -> Result<Self> {
        Self::with_floor(tensor, DEFAULT_POSITIVITY_FLOOR)
    }

    pub fn with_floor(tensor: SymTensorField, floor: f64) -> Result<Self> {
        let m = MetricField { tensor };
        let (node, min_eigenvalue) = m.min_eigenvalue_with_node();
        if !(min_eigenvalue >= floor) {
            return Err(Error::NonPositiveDefinite { node, min_eigenvalue, floor });
        }
        Ok(m)
    }

    pub fn flat(chart: &GridChart) -> Self {
        MetricField { tensor: SymTensorField::identity(chart) }
    }

    /// `e^{2u} delta`.
    pub fn conformally_flat(u: &ScalarField) -> Result<Self> {
        let t = SymTensorField::identity(&u.chart).mul_scalar(&u.map(|v| (2.0 * v).exp()))?;
        Self::new(t)
    }

    pub fn chart(&self) -> &GridChart {
        &self.tensor.chart
    }

    pub fn tensor(&self) -> &SymTensorField {
        &self.tensor
    }

    pub fn into_tensor(self) -> SymTensorField {
        self.tensor
    }

    pub fn dim(&self) -> usize {
        self.tensor.chart.dim()
    }

    /// `g + s h`, revalidated.
    pub fn perturbed(&self, s: f64, h: &SymTensorField) -> Result<Self> {
        MetricField::new(self.tensor.axpy(s, h)?)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        MetricField::new(self.tensor.scale(c))
    }

    fn min_eigenvalue_with_node(&self) -> (usize, f64) {
        let mut worst = (0, f64::INFINITY);
        for node in 0..self.chart().node_count() {
            let e = min_sym_eigenvalue(&self.tensor.matrix_at(node));
            if !(e >= worst.1) {
                worst = (node, e);
                if e.is_nan() {
                    break;
                }
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue_with_node().1
    }

    /// Largest pointwise eigenvalue of the inverse metric.
    pub fn max_inverse_eigenvalue(&self) -> f64 {
        1.0 / self.min_eigenvalue()
    }
}

pub(crate) fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
