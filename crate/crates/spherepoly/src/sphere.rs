use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use einflow_core::model::{ratio_string, sphere_volume, PiMultiple};

use crate::error::{Error, Result};
use crate::poly::ZPoly;

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereIntegral {
    /// Average over `S^{2m-1}`.
    #[serde(with = "ratio_string")]
    pub value: BigRational,
    /// `value * vol(S^{2m-1})`.
    pub raw_total: PiMultiple,
}

impl SphereIntegral {
    fn new(value: BigRational, complex_dim: usize) -> Self {
        let vol = sphere_volume(2 * complex_dim as u32 - 1);
        let raw_total = PiMultiple { coefficient: &value * &vol.coefficient, pi_power: vol.pi_power };
        SphereIntegral { value, raw_total }
    }
}

/// Average of `z^a z-bar^b` over `S^{2m-1}`: zero unless `a = b`, then
/// `(m-1)! prod a_i! / (m-1+|a|)!` (Dirichlet integral of `prod |z_i|^{2 a_i}`).
pub fn monomial_average(z: &[u32], zbar: &[u32], complex_dim: usize) -> Result<SphereIntegral> {
    for v in [z, zbar] {
        if v.len() != complex_dim {
            return Err(Error::DimensionMismatch { expected: complex_dim, found: v.len() });
        }
    }
    Ok(SphereIntegral::new(monomial_average_value(z, zbar), complex_dim))
}

fn monomial_average_value(z: &[u32], zbar: &[u32]) -> BigRational {
    if z != zbar {
        return BigRational::zero();
    }
    let m = z.len() as u64;
    let total: u64 = z.iter().map(|&e| e as u64).sum();
    let num = z.iter().fold(factorial(m - 1), |acc, &e| acc * factorial(e as u64));
    BigRational::new(num, factorial(m - 1 + total))
}

/// Average of the restriction of `p` to `S^{2m-1}`.
pub fn sphere_average(p: &ZPoly) -> BigRational {
    p.terms().iter().map(|((a, b), c)| c * monomial_average_value(a, b)).sum()
}

pub fn sphere_integral(p: &ZPoly) -> SphereIntegral {
    SphereIntegral::new(sphere_average(p), p.complex_dim())
}

/// Euclidean Laplacian with the positive sign convention, `-4 sum d_z d_zbar`.
pub fn ambient_laplacian(p: &ZPoly) -> ZPoly {
    let m = p.complex_dim();
    (0..m).fold(ZPoly::zero(m), |acc, j| &acc + &p.d_z(j).d_zbar(j)).scale_int(-4)
}

/// Polynomial whose restriction to the unit sphere is the sphere Laplacian of the restriction of
/// `p`. Requires `p` homogeneous of total degree `k`: `Delta_S p = Delta p + k (k + 2m - 2) p`
/// on `r = 1`.
pub fn sphere_laplacian(p: &ZPoly) -> Result<ZPoly> {
    if p.is_zero() {
        return Ok(p.clone());
    }
    let k = p.total_degree().ok_or(Error::NotBihomogeneous)? as i64;
    let m = p.complex_dim() as i64;
    Ok(&ambient_laplacian(p) + &p.scale_int(k * (k + 2 * m - 2)))
}

/// `c` with `sphere_laplacian(p) = c p`, if `p` is a sphere eigenfunction.
pub fn sphere_eigenvalue(p: &ZPoly) -> Option<BigRational> {
    let lp = sphere_laplacian(p).ok()?;
    let (key, c0) = p.terms().iter().next()?;
    let c = lp.terms().get(key).cloned().unwrap_or_else(BigRational::zero) / c0;
    (lp == p.scale(&c)).then_some(c)
}

/// Splits `p in P_{k,k}` as `sum_j r^{2(k-j)} q_j` with `q_j in H_{j,j}`, listing nonzero
/// components by decreasing `j`.
///
/// Recursion on `Delta p in P_{k-1,k-1}`: for harmonic `q` of total degree `e`,
/// `Delta(r^{2s} q) = -2s (2s + 2m + 2e - 2) r^{2s-2} q`, so the lower components of `p` are
/// rescaled components of `Delta p`, and the remainder is harmonic.
pub fn harmonic_decompose(p: &ZPoly) -> Result<Vec<(u32, ZPoly)>> {
    if p.is_zero() {
        return Ok(Vec::new());
    }
    match p.bidegree() {
        Some((a, b)) if a == b => decompose(p, a),
        _ => Err(Error::NotBihomogeneous),
    }
}

fn decompose(p: &ZPoly, k: u32) -> Result<Vec<(u32, ZPoly)>> {
    let m = p.complex_dim() as i64;
    if k == 0 {
        return Ok(if p.is_zero() { Vec::new() } else { vec![(0, p.clone())] });
    }
    let lower = decompose(&ambient_laplacian(p), k - 1)?;
    let mut top = p.clone();
    let mut out = Vec::new();
    for (j, q) in lower {
        let s = (k - j) as i64;
        let e = 2 * j as i64;
        let q = q.scale(&(BigRational::one() / rat(-2 * s * (2 * s + 2 * m + 2 * e - 2))));
        top = &top - &(&ZPoly::r_power(p.complex_dim(), s as u32) * &q);
        out.push((j, q));
    }
    if !top.is_zero() {
        out.insert(0, (k, top));
    }
    Ok(out)
}

/// `sum_j r^{2(k-j)} q_j`.
pub fn reassemble(k: u32, parts: &[(u32, ZPoly)], complex_dim: usize) -> ZPoly {
    parts
        .iter()
        .fold(ZPoly::zero(complex_dim), |acc, (j, q)| &acc + &(&ZPoly::r_power(complex_dim, k - j) * q))
}
