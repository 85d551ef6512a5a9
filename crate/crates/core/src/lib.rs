//! Nearly singular single- and double-layer surface integrals for harmonic
//! potentials and Stokes flow.
//!
//! The singular kernels are replaced by erf-smoothed versions with length
//! scale `delta`. Evaluating the smoothed integral for several `delta` and
//! combining the results cancels the leading smoothing error, leaving an
//! error of `O(delta^5)` (or `O(delta^7)` with four values), uniformly for
//! targets on or near the surface. Surfaces are given implicitly by a level
//! set function and integrated with a grid-projection quadrature rule.
//!
//! Module map:
//! - [`surface`]: level-set geometry, closest point projection, built-in surfaces.
//! - [`quadrature`]: grid-line quadrature nodes and partition-of-unity weights.
//! - [`kernels`]: shape functions and regularized Laplace/Stokes kernels.
//! - [`extrapolation`]: error integrals and the extrapolation linear systems.
//! - [`evaluators`]: layer potential evaluation at near and on-surface targets.
//! - [`reference`]: closed-form densities and exact solutions for the test problems.
//! - [`harness`]: target selection, error norms, convergence runs and CSV output.

pub mod error;
pub mod evaluators;
pub mod extrapolation;
pub mod harness;
pub mod kernels;
pub mod quad1d;
pub mod quadrature;
pub mod reference;
pub mod surface;

pub use error::{Error, Result};

/// Points and vectors in R^3.
pub type Vec3 = nalgebra::Vector3<f64>;
