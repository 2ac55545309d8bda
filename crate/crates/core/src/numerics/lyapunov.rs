// SPDX-License-Identifier: Apache-2.0

use super::expm::mat_exp;
use super::linalg::{check_symmetric_psd, eig_real_parts, MAX_ORDER};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-9;

/// Solves `C V + V C^T + Q = 0` for stable `C`.
///
/// The equation is vectorized to `(I ⊗ C + C ⊗ I) vec(V) = -vec(Q)` and
/// solved densely, which is fine for orders up to [`MAX_ORDER`].
pub fn lyapunov_stationary_cov(c: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    let n = c.require_square("Lyapunov drift matrix")?;
    if q.rows() != n || q.cols() != n {
        return Err(Error::dim(
            "Lyapunov noise covariance",
            format!("{n}x{n}"),
            format!("{}x{}", q.rows(), q.cols()),
        ));
    }
    if n > MAX_ORDER {
        return Err(Error::Unsupported(format!("Lyapunov solve of order {n}")));
    }
    let spec = eig_real_parts(c)?;
    if n > 0 && spec.max_real_part >= 0.0 {
        return Err(Error::Stability {
            max_real_part: spec.max_real_part,
        });
    }
    check_symmetric_psd(q, "Lyapunov noise covariance")?;
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }

    // Row-major vec: index i*n + j holds V[i][j].
    let nn = n * n;
    let mut k = nalgebra::DMatrix::<f64>::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for l in 0..n {
                // (C V)_{ij} = sum_l C_il V_lj
                k[(row, l * n + j)] += c[(i, l)];
                // (V C^T)_{ij} = sum_l V_il C_jl
                k[(row, i * n + l)] += c[(j, l)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(nn, q.as_slice().iter().map(|v| -v));
    let sol = k.lu().solve(&rhs).ok_or_else(|| Error::Numeric {
        context: "Lyapunov Kronecker system is singular".into(),
        residual: f64::INFINITY,
    })?;
    let v = DenseMatrix::new(n, n, sol.iter().copied().collect())?.symmetrize();

    let res = lyapunov_residual(c, &v, q);
    let qn = q.norm_inf();
    if res > RESIDUAL_TOL * qn.max(f64::MIN_POSITIVE) && res > 1e-14 {
        return Err(Error::Numeric {
            context: "Lyapunov solve".into(),
            residual: res,
        });
    }
    Ok(v)
}

/// `‖C V + V C^T + Q‖_∞`.
pub fn lyapunov_residual(c: &DenseMatrix, v: &DenseMatrix, q: &DenseMatrix) -> f64 {
    let cv = c.mul_unchecked(v);
    let vct = v.mul_unchecked(&c.transpose());
    cv.add(&vct)
        .and_then(|s| s.add(q))
        .map(|r| r.norm_inf())
        .unwrap_or(f64::INFINITY)
}

/// Transition covariance `∫_0^τ e^{Cs} Q e^{C^T s} ds`.
///
/// Van Loan's block exponential on a short step `h = τ / 2^k`, then the
/// doubling recursion `Cov(2h) = Cov(h) + e^{Ch} Cov(h) e^{C^T h}`. The
/// recursion avoids the growing `e^{-Cτ}` block of the one-shot formula.
pub fn transition_covariance(c: &DenseMatrix, q: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    let n = c.require_square("transition drift matrix")?;
    if q.rows() != n || q.cols() != n {
        return Err(Error::dim(
            "transition noise covariance",
            format!("{n}x{n}"),
            format!("{}x{}", q.rows(), q.cols()),
        ));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("transition time {tau} must be finite and >= 0")));
    }
    if tau == 0.0 || n == 0 {
        return Ok(DenseMatrix::zeros(n, n));
    }
    let norm = c.norm_one() * tau;
    let k = if norm > 1.0 { norm.log2().ceil() as i32 } else { 0 };
    let h = tau / 2f64.powi(k);

    let mut m = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = -c[(i, j)];
            m[(i, n + j)] = q[(i, j)];
            m[(n + i, n + j)] = c[(j, i)];
        }
    }
    let e = mat_exp(&m, h)?;
    let g = e.submatrix(0, n, n, 2 * n);
    let f = e.submatrix(n, 2 * n, n, 2 * n);
    let mut cov = f.transpose().mul_unchecked(&g).symmetrize();
    let mut phi = f.transpose();
    for _ in 0..k {
        let shifted = phi.mul_unchecked(&cov).mul_unchecked(&phi.transpose());
        cov = cov.add(&shifted)?.symmetrize();
        phi = phi.mul_unchecked(&phi);
    }
    Ok(cov)
}
