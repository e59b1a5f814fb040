//! Exact catalog of Einstein model geometries, the stability classification rules, and the
//! conformal multiplier of the shrinker entropy's second variation.
//!
//! Normalizations: round spheres of radius 1 (`mu = n - 1`); Fubini-Study on `CP^n` as the
//! Hopf quotient of the unit sphere (`mu = 2(n+1)`, holomorphic sectional curvature 4);
//! `HP^n` as the quotient of the unit sphere (`1 <= K <= 4`, `mu = 4n + 8`); the quadric
//! `SO(n+2)/(SO(n) x SO(2))` with the metric `|A|^2` on `Hom(R^2, R^n)` (`mu = n`);
//! `S^2 x S^2` with unit factors (`mu = 1`).

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializes exact rationals as `"p/q"` (or `"p"` for integers).
pub mod ratio_string {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(r: &BigRational) -> String {
        if r.denom() == &num_bigint::BigInt::from(1) {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }

    pub fn parse(s: &str) -> Option<BigRational> {
        match s.split_once('/') {
            Some((p, q)) => {
                let q: num_bigint::BigInt = q.trim().parse().ok()?;
                if q == num_bigint::BigInt::from(0) {
                    return None;
                }
                Some(BigRational::new(p.trim().parse().ok()?, q))
            }
            None => Some(BigRational::from_integer(s.trim().parse().ok()?)),
        }
    }

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}")))
    }
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn int(p: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p))
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

fn binomial(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    factorial(n as u64) / (factorial(k as u64) * factorial((n - k) as u64))
}

/// `coefficient * pi^pi_power`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiMultiple {
    #[serde(with = "ratio_string")]
    pub coefficient: BigRational,
    pub pi_power: u32,
}

impl PiMultiple {
    pub fn value(&self) -> f64 {
        self.coefficient.to_f64().unwrap_or(f64::NAN) * std::f64::consts::PI.powi(self.pi_power as i32)
    }

    fn mul(&self, other: &PiMultiple) -> PiMultiple {
        PiMultiple { coefficient: &self.coefficient * &other.coefficient, pi_power: self.pi_power + other.pi_power }
    }
}

/// Volume of the unit sphere `S^n`.
pub fn sphere_volume(n: u32) -> PiMultiple {
    let m = (n / 2) as u64;
    if n % 2 == 0 {
        // 2^{2m+1} m! pi^m / (2m)!
        let num = BigInt::from(2).pow(2 * m as u32 + 1) * factorial(m);
        PiMultiple { coefficient: BigRational::new(num, factorial(2 * m)), pi_power: m as u32 }
    } else {
        PiMultiple { coefficient: BigRational::new(BigInt::from(2), factorial(m)), pi_power: m as u32 + 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralLevel {
    /// Eigenvalue in units of [`ModelSpace::eigen_unit`].
    #[serde(with = "ratio_string")]
    pub eigenvalue: BigRational,
    #[serde(with = "int_string")]
    pub multiplicity: BigInt,
}

mod int_string {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YamabeFlag {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    FlatTorus { dim: usize },
    RoundSphere { dim: usize },
    ComplexProjective { complex_dim: usize },
    QuaternionicProjective { quaternionic_dim: usize },
    Quadric { complex_dim: usize },
    ProductS2S2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    pub name: String,
    pub kind: ModelKind,
    pub dim_real: usize,
    #[serde(with = "ratio_string")]
    pub einstein_constant: BigRational,
    /// Exact volume when it is a rational multiple of a power of pi.
    pub volume_exact: Option<PiMultiple>,
    pub volume: f64,
    /// Eigenvalues are `eigenvalue * eigen_unit`; the unit is 1 for positive Einstein models.
    pub eigen_unit: f64,
    pub spectrum: Vec<SpectralLevel>,
    pub yamabe_local_max: YamabeFlag,
    pub yamabe_citation: String,
    pub excluded_sphere: bool,
    pub normalization: String,
}

impl ModelSpace {
    pub fn scal(&self) -> BigRational {
        &self.einstein_constant * int(self.dim_real as i64)
    }

    pub fn mu_f64(&self) -> f64 {
        self.einstein_constant.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest nonzero eigenvalue.
    pub fn lambda_one(&self) -> &BigRational {
        &self.spectrum[1].eigenvalue
    }

    pub fn is_positive_einstein(&self) -> bool {
        self.einstein_constant.is_positive()
    }

    pub fn csc_data(&self) -> crate::entropy::CscData {
        crate::entropy::CscData {
            dim: self.dim_real,
            volume: self.volume,
            scal: self.scal().to_f64().unwrap_or(f64::NAN),
        }
    }

    pub fn in_spectrum(&self, lambda: &BigRational) -> bool {
        self.spectrum.iter().any(|l| &l.eigenvalue == lambda)
    }
}

pub const DEFAULT_SPECTRUM_LEVELS: usize = 10;

fn collect_levels(pairs: impl IntoIterator<Item = (BigRational, BigInt)>, levels: usize) -> Vec<SpectralLevel> {
    let mut map: BTreeMap<BigRational, BigInt> = BTreeMap::new();
    for (e, m) in pairs {
        if !m.is_zero() {
            *map.entry(e).or_insert_with(BigInt::zero) += m;
        }
    }
    map.into_iter()
        .take(levels)
        .map(|(eigenvalue, multiplicity)| SpectralLevel { eigenvalue, multiplicity })
        .collect()
}

/// Flat torus `R^n / (L Z)^n`; eigenvalues in units of `(2 pi / L)^2`.
pub fn flat_torus(dim: usize, length: f64) -> Result<ModelSpace> {
    if !(2..=4).contains(&dim) || !(length > 0.0) {
        return Err(Error::InvalidInput(format!("flat torus dim {dim}, L {length}")));
    }
    // Count lattice points with |k|^2 = m for m up to a bound that yields enough levels.
    let bound: i64 = 12;
    let mut counts: BTreeMap<i64, i64> = BTreeMap::new();
    let mut k = vec![-bound; dim];
    loop {
        let m: i64 = k.iter().map(|v| v * v).sum();
        if m <= bound * bound {
            *counts.entry(m).or_default() += 1;
        }
        let mut a = 0;
        while a < dim {
            k[a] += 1;
            if k[a] <= bound {
                break;
            }
            k[a] = -bound;
            a += 1;
        }
        if a == dim {
            break;
        }
    }
    let spectrum = collect_levels(
        counts.into_iter().map(|(m, c)| (int(m), BigInt::from(c))),
        DEFAULT_SPECTRUM_LEVELS,
    );
    Ok(ModelSpace {
        name: format!("flat-torus-{dim}"),
        kind: ModelKind::FlatTorus { dim },
        dim_real: dim,
        einstein_constant: BigRational::zero(),
        volume_exact: None,
        volume: length.powi(dim as i32),
        eigen_unit: (std::f64::consts::TAU / length).powi(2),
        spectrum,
        yamabe_local_max: YamabeFlag::Yes,
        yamabe_citation: "flat metrics carry parallel spinors, hence are local Yamabe maxima (Dai-Wang-Wei)".into(),
        excluded_sphere: false,
        normalization: format!("cube of side {length}"),
    })
}

pub fn round_sphere(dim: usize) -> Result<ModelSpace> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("sphere dim {dim}")));
    }
    let n = dim as i64;
    let spectrum = collect_levels(
        (0..DEFAULT_SPECTRUM_LEVELS as i64).map(|k| (int(k * (k + n - 1)), binomial(n + k, n) - binomial(n + k - 2, n))),
        DEFAULT_SPECTRUM_LEVELS,
    );
    let vol = sphere_volume(dim as u32);
    Ok(ModelSpace {
        name: format!("round-sphere-{dim}"),
        kind: ModelKind::RoundSphere { dim },
        dim_real: dim,
        einstein_constant: int(n - 1),
        volume: vol.value(),
        volume_exact: Some(vol),
        eigen_unit: 1.0,
        spectrum,
        yamabe_local_max: YamabeFlag::Yes,
        yamabe_citation: "the round sphere is the Yamabe maximizer (Obata)".into(),
        excluded_sphere: true,
        normalization: "radius 1".into(),
    })
}

/// `dim H_{k,k}(C^{n+1})`, the multiplicity of `4k(k+n)` on `CP^n`.
pub fn cpn_multiplicity(complex_dim: usize, k: usize) -> BigInt {
    let (n, k) = (complex_dim as i64, k as i64);
    let a = binomial(n + k, k);
    let b = binomial(n + k - 1, k - 1);
    &a * &a - &b * &b
}

pub fn complex_projective(complex_dim: usize) -> Result<ModelSpace> {
    if complex_dim < 1 {
        return Err(Error::InvalidInput("CP^0".into()));
    }
    let n = complex_dim as i64;
    let spectrum = collect_levels(
        (0..DEFAULT_SPECTRUM_LEVELS).map(|k| (int(4 * k as i64 * (k as i64 + n)), cpn_multiplicity(complex_dim, k))),
        DEFAULT_SPECTRUM_LEVELS,
    );
    let vol = PiMultiple { coefficient: BigRational::new(BigInt::one(), factorial(n as u64)), pi_power: n as u32 };
    Ok(ModelSpace {
        name: format!("cp{complex_dim}"),
        kind: ModelKind::ComplexProjective { complex_dim },
        dim_real: 2 * complex_dim,
        einstein_constant: int(2 * (n + 1)),
        volume: vol.value(),
        volume_exact: Some(vol),
        eigen_unit: 1.0,
        spectrum,
        yamabe_local_max: YamabeFlag::Yes,
        yamabe_citation: "symmetric space listed as a local Yamabe maximizer with lambda_1 = 2 mu (Cao-He, Tables 1-2)".into(),
        excluded_sphere: complex_dim == 1,
        normalization: "Fubini-Study, Hopf quotient of the unit sphere".into(),
    })
}

/// Multiplicity of `4k(k + 2n + 1)` on `HP^n`:
/// `(2k+2n+1) (k+2n)! (k+2n-1)! / ((2n+1)! (2n-1)! k! (k+1)!)`.
pub fn hpn_multiplicity(quaternionic_dim: usize, k: usize) -> BigInt {
    let (n, k) = (quaternionic_dim as u64, k as u64);
    let num = BigInt::from(2 * k + 2 * n + 1) * factorial(k + 2 * n) * factorial(k + 2 * n - 1);
    let den = factorial(2 * n + 1) * factorial(2 * n - 1) * factorial(k) * factorial(k + 1);
    num / den
}

pub fn quaternionic_projective(quaternionic_dim: usize) -> Result<ModelSpace> {
    if quaternionic_dim < 2 {
        return Err(Error::InvalidInput("HP^n needs n >= 2 (HP^1 is a round sphere)".into()));
    }
    let n = quaternionic_dim as i64;
    let spectrum = collect_levels(
        (0..DEFAULT_SPECTRUM_LEVELS)
            .map(|k| (int(4 * k as i64 * (k as i64 + 2 * n + 1)), hpn_multiplicity(quaternionic_dim, k))),
        DEFAULT_SPECTRUM_LEVELS,
    );
    let vol = PiMultiple {
        coefficient: BigRational::new(BigInt::one(), factorial(2 * n as u64 + 1)),
        pi_power: 2 * n as u32,
    };
    let (flag, citation) = if quaternionic_dim >= 3 {
        (YamabeFlag::Yes, "local Yamabe maximizer for n >= 3 (Cao-He, Table 2)")
    } else {
        (YamabeFlag::Unknown, "not covered by the cited table")
    };
    Ok(ModelSpace {
        name: format!("hp{quaternionic_dim}"),
        kind: ModelKind::QuaternionicProjective { quaternionic_dim },
        dim_real: 4 * quaternionic_dim,
        einstein_constant: int(4 * n + 8),
        volume: vol.value(),
        volume_exact: Some(vol),
        eigen_unit: 1.0,
        spectrum,
        yamabe_local_max: flag,
        yamabe_citation: citation.into(),
        excluded_sphere: false,
        normalization: "quotient of the unit sphere, 1 <= K <= 4".into(),
    })
}

/// Weyl dimension of the `SO(N)` representation with highest weight `(a, b, 0, ..., 0)`.
pub fn so_dimension(big_n: usize, a: i64, b: i64) -> BigInt {
    let r = big_n / 2;
    let odd = big_n % 2 == 1;
    // rho_i = r - i (+ 1/2 when N is odd), i = 1..r.
    let rho: Vec<BigRational> =
        (1..=r).map(|i| int((r - i) as i64) + if odd { rat(1, 2) } else { BigRational::zero() }).collect();
    let mut lam = vec![BigRational::zero(); r];
    lam[0] = int(a);
    if r > 1 {
        lam[1] = int(b);
    }
    let lr: Vec<BigRational> = lam.iter().zip(&rho).map(|(x, y)| x + y).collect();
    let mut num = BigRational::one();
    let mut den = BigRational::one();
    for i in 0..r {
        for j in i + 1..r {
            num *= (&lr[i] - &lr[j]) * (&lr[i] + &lr[j]);
            den *= (&rho[i] - &rho[j]) * (&rho[i] + &rho[j]);
        }
        if odd {
            num *= lr[i].clone();
            den *= rho[i].clone();
        }
    }
    (num / den).to_integer()
}

/// Quadric `SO(n+2)/(SO(n) x SO(2))`, real dimension `2n`, `n >= 3`. Spherical
/// representations have highest weights `(a, b)` with `a >= b >= 0`, `a - b` even, and
/// Laplace eigenvalue `a(a+n) + b(b+n-2)`.
pub fn quadric(complex_dim: usize) -> Result<ModelSpace> {
    if complex_dim < 3 {
        return Err(Error::InvalidInput("quadric needs n >= 3".into()));
    }
    let n = complex_dim as i64;
    let mut pairs = Vec::new();
    for a in 0..=12i64 {
        for b in (0..=a).filter(|b| (a - b) % 2 == 0) {
            pairs.push((int(a * (a + n) + b * (b + n - 2)), so_dimension(complex_dim + 2, a, b)));
        }
    }
    let vol_s1 = sphere_volume(complex_dim as u32 + 1);
    let vol_s0 = sphere_volume(complex_dim as u32);
    let prod = vol_s1.mul(&vol_s0);
    let vol = PiMultiple { coefficient: prod.coefficient * rat(1, 2), pi_power: prod.pi_power - 1 };
    let (flag, citation) = if complex_dim >= 5 {
        (YamabeFlag::Yes, "local Yamabe maximizer with lambda_1 = 2 mu for n >= 5 (Cao-He, Tables 1-2)")
    } else {
        (YamabeFlag::Unknown, "not covered by the cited tables")
    };
    Ok(ModelSpace {
        name: format!("quadric{complex_dim}"),
        kind: ModelKind::Quadric { complex_dim },
        dim_real: 2 * complex_dim,
        einstein_constant: int(n),
        volume: vol.value(),
        volume_exact: Some(vol),
        eigen_unit: 1.0,
        spectrum: collect_levels(pairs, DEFAULT_SPECTRUM_LEVELS),
        yamabe_local_max: flag,
        yamabe_citation: citation.into(),
        excluded_sphere: false,
        normalization: "oriented 2-plane Grassmannian, metric |A|^2 on Hom(R^2, R^n)".into(),
    })
}

pub fn product_s2_s2() -> ModelSpace {
    let mut pairs = Vec::new();
    for l1 in 0..12i64 {
        for l2 in 0..12i64 {
            pairs.push((int(l1 * (l1 + 1) + l2 * (l2 + 1)), BigInt::from((2 * l1 + 1) * (2 * l2 + 1))));
        }
    }
    let vol = PiMultiple { coefficient: int(16), pi_power: 2 };
    ModelSpace {
        name: "s2xs2".into(),
        kind: ModelKind::ProductS2S2,
        dim_real: 4,
        einstein_constant: int(1),
        volume: vol.value(),
        volume_exact: Some(vol),
        eigen_unit: 1.0,
        spectrum: collect_levels(pairs, DEFAULT_SPECTRUM_LEVELS),
        yamabe_local_max: YamabeFlag::No,
        yamabe_citation: "products of positive Einstein metrics are not Yamabe maximizers: the Einstein operator has negative eigenvalues".into(),
        excluded_sphere: false,
        normalization: "unit round factors".into(),
    }
}

/// The default catalog.
pub fn catalog() -> Vec<ModelSpace> {
    let mut out = vec![flat_torus(3, std::f64::consts::TAU).expect("valid torus")];
    for n in 2..=4 {
        out.push(round_sphere(n).expect("valid sphere"));
    }
    for n in 2..=6 {
        out.push(complex_projective(n).expect("valid CP^n"));
    }
    out.push(product_s2_s2());
    for n in 2..=3 {
        out.push(quaternionic_projective(n).expect("valid HP^n"));
    }
    for n in 5..=6 {
        out.push(quadric(n).expect("valid quadric"));
    }
    out
}

/// Looks up a catalog entry by name; `product-einstein` is an alias for `s2xs2`.
pub fn by_name(name: &str) -> Result<ModelSpace> {
    let name = if name == "product-einstein" { "s2xs2" } else { name };
    if let Some(rest) = name.strip_prefix("round-sphere-") {
        return round_sphere(rest.parse().map_err(|_| Error::InvalidInput(name.into()))?);
    }
    if let Some(rest) = name.strip_prefix("cp") {
        if let Ok(n) = rest.parse() {
            return complex_projective(n);
        }
    }
    if let Some(rest) = name.strip_prefix("hp") {
        if let Ok(n) = rest.parse() {
            return quaternionic_projective(n);
        }
    }
    if let Some(rest) = name.strip_prefix("quadric") {
        if let Ok(n) = rest.parse() {
            return quadric(n);
        }
    }
    catalog()
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown model {name:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    DynamicallyStable,
    DynamicallyUnstable,
    BorderlineResolvedUnstable,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    #[serde(with = "opt_ratio")]
    pub witness: Option<BigRational>,
}

mod opt_ratio {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&super::ratio_string::format(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| super::ratio_string::parse(&s).ok_or_else(|| serde::de::Error::custom("bad rational")))
            .transpose()
    }
}

/// Rule engine: Yamabe flag `No` or `lambda_1 < 2 mu` gives unstable; flag `Yes` with
/// `lambda_1 > 2 mu` gives stable; `lambda_1 = 2 mu` with a nonzero cubic witness
/// `int v^3` gives borderline-resolved unstable; anything else is indeterminate.
pub fn classify(m: &ModelSpace, cubic_witness: Option<&BigRational>) -> Result<StabilityVerdict> {
    if m.excluded_sphere {
        return Err(Error::ExcludedSphere);
    }
    // For the flat torus the stored eigenvalue carries a positive unit; only its sign
    // matters against 2 mu = 0.
    let lambda1 = m.lambda_one().clone();
    let two_mu = int(2) * &m.einstein_constant;
    let mut reasons = Vec::new();
    let mut unstable = false;
    if m.yamabe_local_max == YamabeFlag::No {
        reasons.push("not a Yamabe local maximizer".to_string());
        unstable = true;
    }
    if lambda1 < two_mu {
        reasons.push(format!("lambda_1 = {} < 2 mu = {}", ratio_string::format(&lambda1), ratio_string::format(&two_mu)));
        unstable = true;
    }
    if unstable {
        return Ok(StabilityVerdict { verdict: Verdict::DynamicallyUnstable, reasons, witness: None });
    }
    if lambda1 > two_mu {
        if m.yamabe_local_max == YamabeFlag::Yes {
            reasons.push("Yamabe local maximizer".into());
            reasons.push(format!("lambda_1 = {} > 2 mu = {}", ratio_string::format(&lambda1), ratio_string::format(&two_mu)));
            return Ok(StabilityVerdict { verdict: Verdict::DynamicallyStable, reasons, witness: None });
        }
        reasons.push("Yamabe maximality unknown".into());
        return Ok(StabilityVerdict { verdict: Verdict::Indeterminate, reasons, witness: None });
    }
    reasons.push(format!("lambda_1 = 2 mu = {}", ratio_string::format(&two_mu)));
    match cubic_witness {
        Some(w) if !w.is_zero() => {
            reasons.push(format!("eigenfunction with int v^3 = {} != 0", ratio_string::format(w)));
            Ok(StabilityVerdict { verdict: Verdict::BorderlineResolvedUnstable, reasons, witness: Some(w.clone()) })
        }
        Some(w) => {
            reasons.push("cubic witness vanishes".into());
            Ok(StabilityVerdict { verdict: Verdict::Indeterminate, reasons, witness: Some(w.clone()) })
        }
        None => {
            reasons.push("no cubic witness supplied".into());
            Ok(StabilityVerdict { verdict: Verdict::Indeterminate, reasons, witness: None })
        }
    }
}

/// `(n+1)/4 (x-2)(x - n/(n-1)) / (x-1)` with `x = lambda / mu`.
pub fn l_multiplier_at(dim: usize, x: &BigRational) -> Result<BigRational> {
    if x == &BigRational::one() {
        return Err(Error::ResolventPole("lambda = mu".into()));
    }
    let n = int(dim as i64);
    let root = &n / (&n - int(1));
    Ok((&n + int(1)) / int(4) * (x - int(2)) * (x - root) / (x - int(1)))
}

/// Multiplier of the conformal operator on a Laplace eigenfunction with eigenvalue `lambda`.
pub fn conformal_l_multiplier(m: &ModelSpace, lambda: &BigRational) -> Result<BigRational> {
    if !m.is_positive_einstein() {
        return Err(Error::NonPositiveMu { mu: m.mu_f64() });
    }
    if !m.in_spectrum(lambda) {
        return Err(Error::NotInSpectrum(ratio_string::format(lambda)));
    }
    l_multiplier_at(m.dim_real, &(lambda / &m.einstein_constant))
}

/// Second variation of the shrinker entropy on a unit-normalized eigenfunction: the
/// negative of the multiplier.
pub fn nu_conformal_hessian(m: &ModelSpace, lambda: &BigRational) -> Result<BigRational> {
    Ok(-conformal_l_multiplier(m, lambda)?)
}

/// Obata bound `lambda_1 > n mu / (n - 1)` for non-sphere positive Einstein models. This also
/// keeps every nonzero eigenvalue away from the resolvent pole `lambda = mu`.
pub fn satisfies_obata(m: &ModelSpace) -> bool {
    let n = int(m.dim_real as i64);
    m.lambda_one() > &(&n * &m.einstein_constant / (&n - int(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_volumes() {
        assert_eq!(sphere_volume(2), PiMultiple { coefficient: int(4), pi_power: 1 });
        assert_eq!(sphere_volume(3), PiMultiple { coefficient: int(2), pi_power: 2 });
        assert_eq!(sphere_volume(4), PiMultiple { coefficient: rat(8, 3), pi_power: 2 });
        assert_eq!(sphere_volume(5), PiMultiple { coefficient: int(1), pi_power: 3 });
    }

    #[test]
    fn weyl_dimensions() {
        // Vector, adjoint and traceless symmetric square of SO(7) and SO(8).
        assert_eq!(so_dimension(7, 1, 0), BigInt::from(7));
        assert_eq!(so_dimension(7, 1, 1), BigInt::from(21));
        assert_eq!(so_dimension(7, 2, 0), BigInt::from(27));
        assert_eq!(so_dimension(8, 1, 1), BigInt::from(28));
        assert_eq!(so_dimension(8, 2, 0), BigInt::from(35));
    }

    #[test]
    fn hpn_multiplicity_matches_s4_at_n_one() {
        for k in 0..6 {
            let s4 = binomial(4 + k, 4) - binomial(2 + k, 4);
            assert_eq!(hpn_multiplicity(1, k as usize), s4);
        }
        assert_eq!(hpn_multiplicity(2, 1), BigInt::from(14));
    }

    #[test]
    fn rational_strings_round_trip() {
        for r in [rat(8, 5), int(-3), rat(-1, 7)] {
            assert_eq!(ratio_string::parse(&ratio_string::format(&r)), Some(r));
        }
    }
}
