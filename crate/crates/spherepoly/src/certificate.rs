//! The degree-(1,1) eigenfunction on `CP^n` and the exact third-order expansion of the
//! shrinker entropy along the conformal direction it generates.
//!
//! Conventions: Fubini-Study as the Hopf quotient of the unit sphere, so the Einstein
//! constant is `mu = 2(n+1)` and the first eigenvalue is `lambda_1 = 4(n+1) = 2 mu`.
//! Functions on `CP^n` are represented by their `S^1`-invariant lifts to `S^{2n+1}`; products
//! of lifts are lifts of products, and the `CP^n` Laplacian of a lift equals the sphere
//! Laplacian since the fibers are totally geodesic.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use einflow_core::model::{self, ratio_string};

use crate::error::{Error, Result};
use crate::poly::ZPoly;
use crate::sphere::{harmonic_decompose, sphere_average, sphere_eigenvalue, sphere_laplacian};

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational serialized as `"p/q"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Exact(#[serde(with = "ratio_string")] pub BigRational);

fn check_dim(complex_dim: usize) -> Result<()> {
    if complex_dim < 2 {
        return Err(Error::DimensionTooSmall { found: complex_dim, min: 2 });
    }
    Ok(())
}

/// `[z1 z2b + z2 z1b, z2 z3b + z3 z2b, z3 z1b + z1 z3b]` on `C^{n+1}`.
pub fn eigenfunction_summands(complex_dim: usize) -> Result<[ZPoly; 3]> {
    check_dim(complex_dim)?;
    let m = complex_dim + 1;
    Ok([ZPoly::real_pair(m, 0, 1), ZPoly::real_pair(m, 1, 2), ZPoly::real_pair(m, 2, 0)])
}

/// Lift of a first eigenfunction on `CP^n` with nonzero cubic average.
pub fn cpn_eigenfunction(complex_dim: usize) -> Result<ZPoly> {
    let [a, b, c] = eigenfunction_summands(complex_dim)?;
    Ok(&(&a + &b) + &c)
}

/// Lift of `|grad v|^2` on `CP^n` for `v` the descent of a real (1,1) polynomial `h`.
///
/// On `r = 1`, `|grad_S h|^2 = |grad h|^2 - (d_r h)^2 = |grad h|^2 - 4 h^2`, and the fiber
/// derivative vanishes by `S^1`-invariance. For real `h`, `|grad h|^2 = 4 sum d_z h d_zbar h`.
pub fn gradient_norm_squared_on_cpn(h: &ZPoly) -> Result<ZPoly> {
    if h.bidegree() != Some((1, 1)) || !h.is_real() {
        return Err(Error::WrongDegree);
    }
    let m = h.complex_dim();
    let amb = (0..m).fold(ZPoly::zero(m), |acc, j| &acc + &(&h.d_z(j) * &h.d_zbar(j))).scale_int(4);
    Ok(&amb - &(h * h).scale_int(4))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigenfunctionCheck {
    pub s1_invariant: bool,
    pub real: bool,
    pub harmonic: bool,
    pub eigenvalue: Option<Exact>,
    pub eigenvalue_is_twice_einstein: bool,
}

pub fn check_eigenfunction(h: &ZPoly, einstein_constant: &BigRational) -> EigenfunctionCheck {
    let eigenvalue = sphere_eigenvalue(h);
    EigenfunctionCheck {
        s1_invariant: matches!(h.bidegree(), Some((a, b)) if a == b),
        real: h.is_real(),
        harmonic: crate::sphere::ambient_laplacian(h).is_zero(),
        eigenvalue_is_twice_einstein: eigenvalue.as_ref() == Some(&(rat(2) * einstein_constant)),
        eigenvalue: eigenvalue.map(Exact),
    }
}

/// Invertibility of `Delta/mu - 1` on `CP^n`, checked against the catalog spectrum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolventCheck {
    pub einstein_constant: Exact,
    pub levels_checked: usize,
    pub eigenvalues_checked: Vec<Exact>,
    pub pole_in_spectrum: bool,
    /// `lambda_1 > n mu / (n - 1)`, which rules out the pole above zero.
    pub obata_bound_holds: bool,
    pub catalog_consistent: bool,
}

fn resolvent_check(complex_dim: usize, mu: &BigRational, lambda1: &BigRational) -> Result<ResolventCheck> {
    let m = model::complex_projective(complex_dim)?;
    Ok(ResolventCheck {
        einstein_constant: Exact(mu.clone()),
        levels_checked: m.spectrum.len(),
        eigenvalues_checked: m.spectrum.iter().map(|l| Exact(l.eigenvalue.clone())).collect(),
        pole_in_spectrum: m.in_spectrum(mu),
        obata_bound_holds: model::satisfies_obata(&m),
        catalog_consistent: &m.einstein_constant == mu && m.lambda_one() == lambda1,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThirdVariationCertificate {
    pub complex_dim: usize,
    pub real_dim: usize,
    pub einstein_constant: Exact,
    pub eigenfunction: EigenfunctionCheck,
    pub resolvent: ResolventCheck,
    /// Sum of the separately integrated contributions.
    pub value: Exact,
    /// `(3 n_real - 4)` times the average of `v^3`.
    pub headline: Exact,
    pub agree: bool,
    pub pieces: BTreeMap<String, Exact>,
}

/// Third derivative at `t = 0` of the shrinker entropy along `(1 + t v) g` on `CP^n`,
/// assembled from pointwise second variations of `Ric`, `scal`, the Laplacian and the
/// minimizer, each integrated exactly, and compared with `(3 n_real - 4) avg(v^3)`.
///
/// Along this direction `tau' = 0` (since `avg v = 0`), the minimizer varies by
/// `f' = c v` with `c` from the resolvent `(Delta/mu - 1) f' = scal'/(2 mu)`, the entropy
/// gradient has vanishing first variation, and the third derivative reduces to
/// `-(1/(2 mu)) avg <(Ric + Hess f)'', v g>` plus `tau''` terms proportional to `avg v`.
pub fn third_variation_certificate(complex_dim: usize) -> Result<ThirdVariationCertificate> {
    let v = cpn_eigenfunction(complex_dim)?;
    let dim = 2 * complex_dim as i64;
    let n = rat(dim);
    let mu = rat(2 * (complex_dim as i64 + 1));
    let two_mu_inv = BigRational::one() / (rat(2) * &mu);
    let half_n_minus_one = &n / rat(2) - rat(1);

    let eigenfunction = check_eigenfunction(&v, &mu);
    let lambda1 = eigenfunction.eigenvalue.clone().ok_or(Error::WrongDegree)?.0;
    let resolvent = resolvent_check(complex_dim, &mu, &lambda1)?;
    if resolvent.pole_in_spectrum {
        return Err(einflow_core::Error::ResolventPole(format!("mu = {} on CP^{complex_dim}", ratio_string::format(&mu))).into());
    }
    // (Delta/mu - 1) acts on v by this factor.
    let resolvent_factor = &lambda1 / &mu - rat(1);

    let lap_v = sphere_laplacian(&v)?;
    let grad_sq = gradient_norm_squared_on_cpn(&v)?;
    let v2 = &v * &v;
    let v3 = &v2 * &v;
    let lap_v2 = sphere_laplacian(&v2)?;
    let v_lap_v = &v * &lap_v;

    let mean_v = sphere_average(&v);
    let mean_v2 = sphere_average(&v2);
    let mean_v3 = sphere_average(&v3);
    let mean_grad_sq = sphere_average(&grad_sq);
    let mean_grad_sq_v = sphere_average(&(&grad_sq * &v));

    // f' = c v from (Delta/mu - 1) f' = ((n-1) Delta v - n mu v)/(2 mu).
    let c = &two_mu_inv * (&(&n - rat(1)) * &lambda1 - &n * &mu) / &resolvent_factor;

    // Delta' f' = <v g, Hess f'> - <delta(v g) + grad tr(v g)/2, grad f'>.
    let lap_prime_f = &v_lap_v.scale(&-&c) - &grad_sq.scale(&(&c * &half_n_minus_one));
    // scal'' = (n-1)[<v g, Hess v> - <delta(v g) + grad tr(v g)/2, grad v> + Delta(v^2)]
    //          + n mu v^2 - [Delta tr(v g) + delta delta(v g) - <Ric, v g>] v.
    let scal_second = &(&(&(&(-&v_lap_v) - &grad_sq.scale(&half_n_minus_one)) + &lap_v2).scale(&(&n - rat(1)))
        + &v2.scale(&(&n * &mu)))
        - &(&(&lap_v.scale(&(&n - rat(1))) - &v.scale(&(&n * &mu))) * &v);
    // Right-hand side of (Delta/mu - 1) f'' = (A), without its tau'' n mu constant.
    let a_poly = (&(&lap_prime_f.scale_int(2) + &grad_sq.scale(&(&c * &c))) - &scal_second.scale(&(BigRational::one() / rat(2))))
        .scale(&-(BigRational::one() / &mu));
    // avg f'' v = avg (A) (Delta/mu - 1)^{-1} v.
    let mean_f2_v = sphere_average(&(&a_poly * &v)) / &resolvent_factor;
    // tr (Hess f)'' = -Delta f'' + (n - 2) c |grad v|^2.
    let hessian_term = -&two_mu_inv * (-&lambda1 * &mean_f2_v + (&n - rat(2)) * &c * &mean_grad_sq_v);

    // tr Ric'' = -n (n/2 - 2)|grad v|^2 - 2 mu n v^2 + 3 (n/2 - 1)|grad v|^2 - (n - 2) v Delta v.
    let tr_ric_second = &(&(&grad_sq.scale(&(-&n * (&n / rat(2) - rat(2)) + rat(3) * &half_n_minus_one))
        - &v2.scale(&(rat(2) * &mu * &n)))
        - &v_lap_v.scale(&(&n - rat(2))))
        * &v;
    let ricci_term = -&two_mu_inv * sphere_average(&tr_ric_second);

    // Per unit tau'': -tau'' g in the gradient, and tau'' n mu in (A).
    let tau_term = &n * &mean_v + -&two_mu_inv * (-&lambda1 / &resolvent_factor) * &n * &mu * &mean_v;

    let value = &ricci_term + &hessian_term + &tau_term;
    let headline = rat(3 * dim - 4) * &mean_v3;

    let cubic_decomposition = harmonic_decompose(&v3)?;
    let constant_component = cubic_decomposition
        .iter()
        .find(|(j, _)| *j == 0)
        .map(|(_, q)| sphere_average(q))
        .unwrap_or_else(BigRational::zero);

    let mut pieces = BTreeMap::new();
    for (k, val) in [
        ("mean_v", mean_v),
        ("mean_v2", mean_v2.clone()),
        ("mean_v3", mean_v3.clone()),
        ("mean_grad_sq", mean_grad_sq.clone()),
        ("mean_grad_sq_v", mean_grad_sq_v.clone()),
        ("grad_sq_identity_gap", &mean_grad_sq - &lambda1 * &mean_v2),
        ("cubic_parts_identity_gap", &mean_grad_sq_v - &mu * &mean_v3),
        ("f_prime_coefficient", c),
        ("mean_f_second_v", mean_f2_v),
        ("ricci_second_term", ricci_term),
        ("hessian_second_term", hessian_term),
        ("tau_second_term", tau_term),
        ("cubic_constant_component", constant_component),
        ("resolvent_factor_on_v", resolvent_factor),
    ] {
        pieces.insert(k.to_string(), Exact(val));
    }
    Ok(ThirdVariationCertificate {
        complex_dim,
        real_dim: dim as usize,
        einstein_constant: Exact(mu),
        eigenfunction,
        resolvent,
        agree: value == headline,
        value: Exact(value),
        headline: Exact(headline),
        pieces,
    })
}
