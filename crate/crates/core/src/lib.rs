//! Self-consistent stationary measures of mean-field gradient diffusions,
//! and detection of the parameter values where new branches of solutions
//! appear.
//!
//! The central object is the measure-valued fixed-point problem
//!
//! ```text
//! mu(dx) = exp{-theta(alpha) V0(x) - alpha ∫ V(x,y) mu(dy)} dx / Z(alpha, mu)
//! ```
//!
//! solved on composite Gauss-Legendre grids. On top of the solvers sit a
//! Nystrom discretization of the linearized operator, its regularized
//! determinant, and the finite-rank matrix tests that certify bifurcation
//! points. An Euler-Maruyama particle simulator cross-validates the solved
//! measures against the dynamics they are supposed to be invariant for.

pub mod bifurcation;
pub mod error;
pub mod expr;
pub mod gibbs;
pub mod model;
pub mod model_io;
pub mod particles;
pub mod quadrature;
pub mod report;
pub mod selfconsistency;
pub mod spectral;

pub use error::{Error, Result};
