// SPDX-License-Identifier: Apache-2.0

//! Eigenvalue real parts, linear solves and SVD helpers for small orders.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Dense methods are only used up to this order.
pub const MAX_ORDER: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub real_parts: Vec<f64>,
    pub max_real_part: f64,
}

/// Real parts of all eigenvalues via the real Schur form.
pub fn eig_real_parts(m: &DenseMatrix) -> Result<SpectrumSummary> {
    let n = m.require_square("eig_real_parts operand")?;
    if n > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "eigenvalues requested for order {n} > {MAX_ORDER}"
        )));
    }
    if n == 0 {
        return Ok(SpectrumSummary {
            real_parts: vec![],
            max_real_part: f64::NEG_INFINITY,
        });
    }
    let na = m.to_na();
    let schur = Schur::try_new(na.clone(), f64::EPSILON, 200 * n).ok_or_else(|| {
        Error::Numeric {
            context: format!("Schur iteration did not converge for order {n}"),
            residual: subdiagonal_residual(&na),
        }
    })?;
    let real_parts: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.re).collect();
    let max_real_part = real_parts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumSummary {
        real_parts,
        max_real_part,
    })
}

fn subdiagonal_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (1..n).map(|i| m[(i, i - 1)].abs()).fold(0.0, f64::max)
}

/// Solves `A x = b` by partial-pivot LU.
pub fn solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.require_square("linear system")?;
    if b.len() != n {
        return Err(Error::dim("right-hand side", n, b.len()));
    }
    let lu = a.to_na().lu();
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::Numeric {
            context: "singular linear system".into(),
            residual: f64::INFINITY,
        })?;
    Ok(x.iter().copied().collect())
}

pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    a.require_square("inverse operand")?;
    let inv = a.to_na().try_inverse().ok_or_else(|| Error::Numeric {
        context: "matrix is singular".into(),
        residual: f64::INFINITY,
    })?;
    Ok(DenseMatrix::from_na(&inv))
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = a.to_na().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Reciprocal 2-norm condition number, 0 for singular matrices.
pub fn rcond(a: &DenseMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Numerical rank with threshold `max(rows, cols) * sigma_max * rel`.
pub fn numerical_rank(a: &DenseMatrix, rel: f64) -> usize {
    let s = singular_values(a);
    let Some(&smax) = s.first() else { return 0 };
    let thresh = a.rows().max(a.cols()) as f64 * smax * rel;
    s.iter().filter(|&&v| v > thresh).count()
}

/// Orthonormal basis of the null space of `a` (right singular vectors for
/// singular values under the rank threshold).
pub fn null_space(a: &DenseMatrix, rel: f64) -> Vec<Vec<f64>> {
    let (r, n) = (a.rows(), a.cols());
    if n == 0 {
        return vec![];
    }
    // Pad with zero rows so the SVD yields a full set of right vectors.
    let rows = r.max(n);
    let mut padded = DMatrix::<f64>::zeros(rows, n);
    for i in 0..r {
        for j in 0..n {
            padded[(i, j)] = a[(i, j)];
        }
    }
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thresh = r.max(n) as f64 * smax * rel;
    let mut basis = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= thresh || smax == 0.0 {
            basis.push(vt.row(k).iter().copied().collect());
        }
    }
    basis
}

/// Minimum-norm least-squares solution of `A x = b`.
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::dim("least-squares right-hand side", a.rows(), b.len()));
    }
    let svd = a.to_na().svd(true, true);
    let x = svd
        .solve(&DVector::from_column_slice(b), 1e-14)
        .map_err(|e| Error::Numeric {
            context: format!("least squares: {e}"),
            residual: f64::INFINITY,
        })?;
    Ok(x.iter().copied().collect())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    a.require_square("symmetric eigen operand")?;
    let mut e: Vec<f64> = SymmetricEigen::new(a.symmetrize().to_na())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(e)
}

/// Factor `L` with `L L^T = a` for symmetric PSD `a`. Uses the symmetric
/// eigendecomposition so semidefinite (rank-deficient) inputs are fine.
pub fn psd_sqrt(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.require_square("covariance factor")?;
    let eig = SymmetricEigen::new(a.symmetrize().to_na());
    let scale = a.max_abs().max(1e-300);
    let mut l = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam < -1e-9 * scale {
            return Err(Error::Domain(format!(
                "covariance is not positive semidefinite (eigenvalue {lam:e})"
            )));
        }
        let s = lam.max(0.0).sqrt();
        for i in 0..n {
            l[(i, k)] = eig.eigenvectors[(i, k)] * s;
        }
    }
    Ok(l)
}

pub(crate) fn check_symmetric_psd(q: &DenseMatrix, what: &str) -> Result<()> {
    let n = q.require_square(what)?;
    let scale = q.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (q[(i, j)] - q[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Domain(format!("{what} is not symmetric at ({i},{j})")));
            }
        }
    }
    let eig = symmetric_eigenvalues(q)?;
    if let Some(&lo) = eig.first() {
        if lo < -1e-10 * scale {
            return Err(Error::Domain(format!(
                "{what} is not positive semidefinite (eigenvalue {lo:e})"
            )));
        }
    }
    Ok(())
}
