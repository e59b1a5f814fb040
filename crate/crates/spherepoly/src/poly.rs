use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents of `z` and of `z-bar`.
pub type Exponents = (Vec<u32>, Vec<u32>);

/// Polynomial in `z_1..z_m, z-bar_1..z-bar_m` with rational coefficients. Zero coefficients are
/// never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZPoly {
    complex_dim: usize,
    terms: BTreeMap<Exponents, BigRational>,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl ZPoly {
    pub fn zero(complex_dim: usize) -> Self {
        ZPoly { complex_dim, terms: BTreeMap::new() }
    }

    pub fn constant(complex_dim: usize, c: BigRational) -> Self {
        Self::monomial(complex_dim, vec![0; complex_dim], vec![0; complex_dim], c).expect("lengths match")
    }

    pub fn monomial(complex_dim: usize, z: Vec<u32>, zbar: Vec<u32>, c: BigRational) -> Result<Self> {
        for v in [&z, &zbar] {
            if v.len() != complex_dim {
                return Err(Error::DimensionMismatch { expected: complex_dim, found: v.len() });
            }
        }
        let mut p = Self::zero(complex_dim);
        p.add_term((z, zbar), c);
        Ok(p)
    }

    /// `z_i z-bar_j` (0-based indices).
    pub fn z_zbar(complex_dim: usize, i: usize, j: usize) -> Self {
        let mut z = vec![0; complex_dim];
        let mut zb = vec![0; complex_dim];
        z[i] += 1;
        zb[j] += 1;
        Self::monomial(complex_dim, z, zb, BigRational::one()).expect("lengths match")
    }

    /// `z_i z-bar_j + z_j z-bar_i`, a real polynomial of bidegree (1, 1).
    pub fn real_pair(complex_dim: usize, i: usize, j: usize) -> Self {
        &Self::z_zbar(complex_dim, i, j) + &Self::z_zbar(complex_dim, j, i)
    }

    /// `r^2 = sum |z_j|^2`.
    pub fn r_squared(complex_dim: usize) -> Self {
        (0..complex_dim).fold(Self::zero(complex_dim), |acc, j| &acc + &Self::z_zbar(complex_dim, j, j))
    }

    pub fn r_power(complex_dim: usize, half_power: u32) -> Self {
        let r2 = Self::r_squared(complex_dim);
        (0..half_power).fold(Self::one(complex_dim), |acc, _| &acc * &r2)
    }

    pub fn one(complex_dim: usize) -> Self {
        Self::constant(complex_dim, BigRational::one())
    }

    pub fn complex_dim(&self) -> usize {
        self.complex_dim
    }

    pub fn terms(&self) -> &BTreeMap<Exponents, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, key: Exponents, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(key.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero(self.complex_dim);
        if !c.is_zero() {
            for (k, v) in &self.terms {
                out.terms.insert(k.clone(), v * c);
            }
        }
        out
    }

    pub fn scale_int(&self, c: i64) -> Self {
        self.scale(&rat(c))
    }

    /// `(deg_z, deg_zbar)` when every term has the same bidegree; the zero polynomial has none.
    pub fn bidegree(&self) -> Option<(u32, u32)> {
        let mut degs = self.terms.keys().map(|(a, b)| (a.iter().sum::<u32>(), b.iter().sum::<u32>()));
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    /// Equal total degree on every term.
    pub fn total_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(|(a, b)| a.iter().sum::<u32>() + b.iter().sum::<u32>());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    /// Real-valued on `C^m`: `coeff(a, b) = coeff(b, a)` (coefficients are rational).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|((a, b), c)| self.terms.get(&(b.clone(), a.clone())) == Some(c))
    }

    /// `d/dz_j`.
    pub fn d_z(&self, j: usize) -> Self {
        self.derive(j, false)
    }

    /// `d/dz-bar_j`.
    pub fn d_zbar(&self, j: usize) -> Self {
        self.derive(j, true)
    }

    fn derive(&self, j: usize, bar: bool) -> Self {
        let mut out = Self::zero(self.complex_dim);
        for ((a, b), c) in &self.terms {
            let e = if bar { b[j] } else { a[j] };
            if e == 0 {
                continue;
            }
            let (mut a, mut b) = (a.clone(), b.clone());
            if bar {
                b[j] -= 1;
            } else {
                a[j] -= 1;
            }
            out.add_term((a, b), c * rat(e as i64));
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(self.complex_dim), |acc, _| &acc * self)
    }

    /// Value at `z`; the real part is returned for real polynomials.
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|((a, b), c)| {
                let mono: Complex64 = (0..self.complex_dim)
                    .map(|j| z[j].powu(a[j]) * z[j].conj().powu(b[j]))
                    .product();
                mono * c.to_f64().unwrap_or(f64::NAN)
            })
            .sum()
    }
}

impl Add for &ZPoly {
    type Output = ZPoly;
    fn add(self, rhs: &ZPoly) -> ZPoly {
        assert_eq!(self.complex_dim, rhs.complex_dim, "complex dimension mismatch");
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }
}

impl Sub for &ZPoly {
    type Output = ZPoly;
    fn sub(self, rhs: &ZPoly) -> ZPoly {
        self + &(-rhs)
    }
}

impl Neg for &ZPoly {
    type Output = ZPoly;
    fn neg(self) -> ZPoly {
        self.scale_int(-1)
    }
}

impl Mul for &ZPoly {
    type Output = ZPoly;
    fn mul(self, rhs: &ZPoly) -> ZPoly {
        assert_eq!(self.complex_dim, rhs.complex_dim, "complex dimension mismatch");
        let mut out = ZPoly::zero(self.complex_dim);
        for ((a1, b1), c1) in &self.terms {
            for ((a2, b2), c2) in &rhs.terms {
                let a = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                let b = b1.iter().zip(b2).map(|(x, y)| x + y).collect();
                out.add_term((a, b), c1 * c2);
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    z: Vec<u32>,
    zbar: Vec<u32>,
    #[serde(with = "einflow_core::model::ratio_string")]
    coeff: BigRational,
}

#[derive(Serialize, Deserialize)]
struct ZPolyRepr {
    complex_dim: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for ZPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ZPolyRepr {
            complex_dim: self.complex_dim,
            terms: self
                .terms
                .iter()
                .map(|((a, b), c)| TermRepr { z: a.clone(), zbar: b.clone(), coeff: c.clone() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ZPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ZPolyRepr::deserialize(d)?;
        let mut p = ZPoly::zero(r.complex_dim);
        for t in r.terms {
            if t.z.len() != r.complex_dim || t.zbar.len() != r.complex_dim {
                return Err(serde::de::Error::custom("exponent vector length"));
            }
            p.add_term((t.z, t.zbar), t.coeff);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_keeps_canonical_form() {
        let p = ZPoly::real_pair(3, 0, 1);
        assert!((&p - &p).is_zero());
        assert_eq!(p.terms().len(), 2);
        assert!(p.is_real());
        assert!(!ZPoly::z_zbar(3, 0, 1).is_real());
    }

    #[test]
    fn derivatives_follow_the_power_rule() {
        let p = ZPoly::z_zbar(2, 0, 0).pow(2);
        let expected = ZPoly::monomial(2, vec![1, 0], vec![2, 0], rat(2)).unwrap();
        assert_eq!(p.d_z(0), expected);
        assert!(p.d_z(1).is_zero());
    }
}
