//! Numerical laboratory for one-dimensional diffusion models under
//! curvature-dimension conditions: spectral gaps, eigenfunction deficits,
//! Stein-equation solvers, exact 1D Wasserstein distances, and stability
//! rate experiments for Beta, Gaussian and generalized Cauchy targets.

pub mod error;
pub mod par;

pub mod fd;
pub mod fit;
pub mod grid;
pub mod quadrature;
pub mod simplex;
pub mod special;
pub mod tridiag;

pub mod estimates;
pub mod experiments;
pub mod measures;
pub mod models;
pub mod spectral;
pub mod stein;

pub use error::{Error, Result};
