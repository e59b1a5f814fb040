//! Numerical Riemannian geometry on periodic grids: curvature and its
//! linearizations, the expander and shrinker entropies, a catalog of Einstein
//! model spaces, and Ricci-flow integrators.

pub mod entropy;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod io;
mod local;
pub mod lojasiewicz;
pub mod model;
pub mod sample;
pub mod spectral;
pub mod variation;

pub use error::{Error, Result};
pub use field::{MetricField, OneFormField, ScalarField, SymTensorField};
pub use grid::{FdOrder, GridChart};
