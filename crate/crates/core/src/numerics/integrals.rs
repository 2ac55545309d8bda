// SPDX-License-Identifier: Apache-2.0

use super::expm::mat_exp;
use super::linalg::{rcond, solve};
use super::matrix::DenseMatrix;
use super::quadrature::{adaptive_simpson_vec, DEFAULT_ABS_TOL};
use crate::error::{Error, Result};

/// Below this reciprocal condition number the closed form is not trusted.
pub const RCOND_GATE: f64 = 1e-10;

/// `∫_0^τ e^{Cs} μ ds`.
///
/// Uses `C^{-1}(e^{Cτ} - I) μ` when `C` is well conditioned, otherwise
/// adaptive Simpson.
pub fn integrate_mat_exp(c: &DenseMatrix, mu: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_args(c, mu, tau)?;
    if rcond(c) > RCOND_GATE {
        integrate_mat_exp_closed(c, mu, tau)
    } else {
        integrate_mat_exp_quadrature(c, mu, tau)
    }
}

fn check_args(c: &DenseMatrix, mu: &[f64], tau: f64) -> Result<usize> {
    let n = c.require_square("integrate_mat_exp matrix")?;
    if mu.len() != n {
        return Err(Error::dim("integrate_mat_exp vector", n, mu.len()));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("integration horizon {tau} must be finite and >= 0")));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("integrate_mat_exp vector has non-finite entries".into()));
    }
    Ok(n)
}

pub fn integrate_mat_exp_closed(c: &DenseMatrix, mu: &[f64], tau: f64) -> Result<Vec<f64>> {
    let n = check_args(c, mu, tau)?;
    let e = mat_exp(c, tau)?;
    let rhs: Vec<f64> = e
        .matvec_unchecked(mu)
        .iter()
        .zip(mu)
        .map(|(a, b)| a - b)
        .collect();
    if n == 0 {
        return Ok(vec![]);
    }
    solve(c, &rhs)
}

pub fn integrate_mat_exp_quadrature(c: &DenseMatrix, mu: &[f64], tau: f64) -> Result<Vec<f64>> {
    let n = check_args(c, mu, tau)?;
    adaptive_simpson_vec(
        |s| match mat_exp(c, s) {
            Ok(e) => e.matvec_unchecked(mu),
            Err(_) => vec![f64::NAN; n],
        },
        n,
        0.0,
        tau,
        DEFAULT_ABS_TOL,
    )
}
