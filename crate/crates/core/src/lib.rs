//! Multihomogeneous forms on products of spheres.
//!
//! Exact-rational algebra on `P_{N,K}` (forms of degree `2k_i` in each
//! variable block), the usual and differential inner products, the
//! Π-harmonic decomposition with its zonal kernels, the averaging operator
//! `T`, cone membership tests for nonnegative / sum-of-squares / linear-power
//! forms, Monte Carlo volume estimates for sections of those cones, and
//! closed-form evaluators for the matching volume bounds.

pub mod bounds;
pub mod cones;
pub mod error;
pub mod float;
pub mod harmonics;
pub mod linalg;
pub mod measures;
pub mod parse;
pub mod poly;
pub mod shape;
pub mod transform;
pub mod volumetrics;

pub use error::{Error, Result};
pub use float::FloatPoly;
pub use parse::parse_polynomial;
pub use poly::Polynomial;
pub use shape::{monomial_basis, Block, MultiIndex, Shape};

/// Exact coefficient type.
pub type Rational = num_rational::BigRational;
