// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense linear-algebra primitives, the elastic-net solver and first
//! principal component extraction. Everything here is a pure function over
//! immutable inputs.

mod elastic_net;
mod matrix;
mod pca;

pub use elastic_net::{
    elastic_net_solve, elastic_net_solve_traced, kkt_tolerance, kkt_violation, objective,
    residual_f64, soft_threshold, SolverConfig, SparseSolution, DEFAULT_LAMBDA, DEFAULT_MAX_SWEEPS,
    DEFAULT_RHO, DEFAULT_TOL,
};
pub use matrix::{dot, max_abs_diff, norm2, norm_inf, DenseMatrix};
pub(crate) use matrix::ensure_finite;
pub use pca::{mean_rows, pca_first_component, PCA_MAX_ITERS, PCA_STEP_TOL};
