//! Numerical checks of low-temperature exit-event asymptotics for overdamped
//! Langevin dynamics `dX = -∇f(X) dt + sqrt(2/β) dB` leaving a domain Ω₊.
//!
//! The crate assembles boundary Witten Laplacians
//! `-h²Δ + |∇f|² - hΔf` (with `h = 2/β`) by exponential fitting, computes their
//! exponentially small eigenvalues with shift-invert Lanczos, and compares
//! them against Laplace-type asymptotic formulas, Agmon distances and Monte
//! Carlo exit statistics.
//!
//! Everything works on points of the plane; one-dimensional fields ignore the
//! second coordinate.

pub mod agmon;
pub mod asymptotics;
pub mod domain;
pub mod error;
pub mod grid;
pub mod lanczos;
pub mod mc;
pub mod operator;
pub mod pipeline;
pub mod potential;
pub mod sparse;
pub mod spectra;
pub mod stats;

pub use domain::{DomainPair, Region};
pub use error::{Error, Result};
pub use grid::{build_grid, Bc, Grid, GridPolicy};
pub use operator::{assemble_witten0, assemble_witten1_1d, DiscreteOperator};
pub use potential::{Bump, Field, Potential, ScalarField};
pub use spectra::{smallest_eigenpairs, SpectralResult};

/// A point of ℝ²; 1D code uses only the first coordinate.
pub type Point = [f64; 2];

/// Symmetric 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

/// Semiclassical parameter from inverse temperature.
pub fn h_from_beta(beta: f64) -> f64 {
    2.0 / beta
}

pub fn beta_from_h(h: f64) -> f64 {
    2.0 / h
}

/// Counting threshold ν(h) = h^exponent.
pub fn nu(h: f64, exponent: f64) -> f64 {
    h.powf(exponent)
}

pub const DEFAULT_NU_EXPONENT: f64 = 1.2;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
