//! Monotone wide-stencil solver for the parabolic complex Monge-Ampère
//! Cauchy-Dirichlet problem on strongly pseudoconvex domains in ℂ and ℂ².
//!
//! The flow is `∂_t u = log(MA(u)/f) − F(t, z, u)` with `MA(|z|²) = 1`.
//! Everything here needs only `alloc`; file formats and the command line
//! live in the `pmaflow` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod admissibility;
pub mod analysis;
pub mod barriers;
pub mod corpus;
pub mod domain;
pub mod elliptic;
mod error;
pub mod field;
pub mod frames;
pub mod grid;
mod math;
pub mod operator;
pub mod problem;
pub mod regularization;
pub mod solver;
pub mod tol;

pub use domain::{DomainSpec, Point};
pub use error::{Error, Result, Role};
pub use field::SpaceTimeField;
pub use frames::{ComplexDirection, FrameSet};
pub use grid::{Discretization, GridFunction, NodeClass, SpaceGrid};
pub use operator::MongeAmpere;
pub use problem::ProblemData;
pub use solver::{SolverConfig, Trajectory};
