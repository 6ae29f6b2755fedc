//! Graded Riemannian geometry on a single chart of a supermanifold.
//!
//! Numbers are elements of a finite Grassmann algebra ([`grassmann`]);
//! metrics are matrices of symbolic superfunctions ([`superexpr`]). On top of
//! that the crate computes Levi-Civita Christoffel symbols ([`geometry`]),
//! integrates supergeodesics ([`geodesics`]) and the Hamiltonian geodesic flow
//! on the cotangent chart ([`cotangent`]), and builds the exponential map with
//! its linearization and isometry checks ([`expmap`]).

pub mod classical;
pub mod cotangent;
pub mod error;
pub mod expmap;
pub mod geodesics;
pub mod geometry;
pub mod grassmann;
pub mod model;
pub mod ode;
pub mod parallel;
pub mod report;
pub mod verify;
pub mod superexpr;

pub use error::{Error, Result};
pub use grassmann::{GrassmannElement, Parity};
pub use parallel::Execution;
pub use superexpr::{ChartSignature, Expr, SuperMorphism, SuperPoint};
