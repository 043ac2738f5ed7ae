//! Non-isospectral AKNS hierarchies and their Darboux transformations.
//!
//! The crate builds the time-part coefficients of a Lax pair from a
//! potential, dresses a seed solution with a Darboux matrix built from
//! eigenfunctions, and constructs MKdV solitons as a worked example.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darboux;
pub mod error;
pub mod flow;
pub mod grid;
pub mod hierarchy;
pub mod matrix;
pub mod soliton;
pub mod tolerances;

pub use error::{Error, Result};
pub use flow::{compute_g, perm_extremes, GPolynomial, SpectralPath, SpectralPolynomial};
pub use grid::{FieldGrid, Grid};
pub use hierarchy::{build_hierarchy, recurrence_residual, HierarchyFields, IntegralConstants};
pub use matrix::{DiagonalGenerator, SquareMatrix, C64};
pub use tolerances::Tolerances;
