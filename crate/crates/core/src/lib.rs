//! Numerics for the Dirichlet problem
//! `−Δ_{p(x)} u = a(x) u^{q(x)−1} + λ b(x) u^{−δ(x)}`, `u > 0`, on a box:
//! variable-exponent norms, the energy and its fiber maps, and constrained
//! minimization on the two parts of the Nehari manifold.

// `!(x > 0.0)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod domain;
pub mod energy;
pub mod error;
pub mod nehari;
pub mod oracle;
pub mod solver;
mod sparse;
pub mod vexp;

pub use config::RunConfig;
pub use domain::{validate_hypotheses, FieldSpec, Mesh, ProblemData};
pub use energy::{energy, nehari_residual, weak_gradient, Fiber, FiberClass};
pub use error::{Error, Result};
pub use nehari::{classify, lambda_report, project, Branch, LambdaReport};
pub use oracle::oracle_global_scan;
pub use solver::{minimize_on_nminus, minimize_on_nplus, solve_both, verify_solution, SolveConfig, SolveReport};
pub use vexp::{luxemburg_norm, modular, sobolev_norm, GridFunction};
