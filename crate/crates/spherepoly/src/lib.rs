//! Exact rational polynomial calculus in `z, z-bar` on `C^m`, restricted to the unit sphere
//! `S^{2m-1}` and descended to `CP^{m-1}`.
//!
//! Averages are always with respect to normalized measure. An `S^1`-invariant polynomial
//! descends to `CP^{m-1}`, and its average there equals its average over `S^{2m-1}` because the
//! Hopf projection pushes normalized measure to normalized measure. Every `CP^n` integral in
//! this crate is computed that way.

pub mod certificate;
pub mod error;
pub mod montecarlo;
pub mod poly;
pub mod sphere;

pub use certificate::{cpn_eigenfunction, gradient_norm_squared_on_cpn, third_variation_certificate};
pub use error::{Error, Result};
pub use poly::ZPoly;
pub use sphere::{ambient_laplacian, harmonic_decompose, monomial_average, SphereIntegral};
