// SPDX-License-Identifier: Apache-2.0

//! Dense small-matrix kernels and quadrature.

mod expm;
mod integrals;
mod linalg;
mod lyapunov;
mod matrix;
pub mod quadrature;

pub use expm::mat_exp;
pub use integrals::{
    integrate_mat_exp, integrate_mat_exp_closed, integrate_mat_exp_quadrature, RCOND_GATE,
};
pub use linalg::{
    eig_real_parts, inverse, least_squares, null_space, numerical_rank, psd_sqrt, rcond,
    singular_values, solve, symmetric_eigenvalues, SpectrumSummary, MAX_ORDER,
};
pub(crate) use linalg::check_symmetric_psd;
pub use lyapunov::{lyapunov_residual, lyapunov_stationary_cov, transition_covariance};
pub use matrix::{dot, max_abs_diff, norm2, DenseMatrix};
