//! Discrete anisotropic p-Laplacian in the plane.
//!
//! The crate minimizes
//! `sum_i int |u_xi|^p_i / p_i` (plus optional `eps` and `sigma`
//! regularizations) over fields with prescribed boundary values on a
//! uniform grid, and measures the regularity estimates such minimizers
//! satisfy: the max/min principle for derivatives, the Lebesgue oscillation
//! inequality, Caccioppoli-type bounds, convergence as `eps -> 0`, and the
//! logarithmic modulus of continuity of the gradient.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod problems;
pub mod solver;
pub mod sparse;

pub use energy::{energy, p_flux, p_inequality_gap, residual, ExponentPair, Reduction, RegularizationParams};
pub use error::{Error, Result};
pub use grid::{
    circle_sample_count, disk_integral, sample_circle, Axis, CellField, CellGradientField, DiskSpec, Grid, PlanarField,
    Point, ScalarField,
};
pub use solver::{solve_dirichlet, SeparableSolution, Solution, SolveReport, SolverConfig};
