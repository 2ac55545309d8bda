// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Companion-form state space of a CARMA(p, q) process.
///
/// Returns `(A, b, e_p)`: `A` has ones on the superdiagonal and last row
/// `(-α_p, ..., -α_1)`, `b = (b_0, ..., b_q, 0, ..., 0)` with `b_q = 1`,
/// and `e_p` is the last unit vector. `b` may be given with length `q + 1`
/// or already padded to `p`.
///
/// Negative `α` entries are rejected. Zero entries are allowed so that
/// boundary (non-stationary) cases can be represented and classified.
pub fn build_carma_state_space(
    p: usize,
    q: usize,
    alpha: &[f64],
    b: &[f64],
) -> Result<(DenseMatrix, Vec<f64>, Vec<f64>)> {
    if p == 0 {
        return Err(Error::Parameter("CARMA order p must be at least 1".into()));
    }
    if q >= p {
        return Err(Error::Parameter(format!("CARMA needs q < p, got q={q}, p={p}")));
    }
    if alpha.len() != p {
        return Err(Error::dim("CARMA alpha", p, alpha.len()));
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::Parameter(format!("CARMA alpha entries must be >= 0, got {a}")));
    }
    let mut b_vec = vec![0.0; p];
    match b.len() {
        n if n == q + 1 => b_vec[..=q].copy_from_slice(b),
        n if n == p => {
            if b[q + 1..].iter().any(|v| *v != 0.0) {
                return Err(Error::Parameter(format!(
                    "CARMA b must vanish above index q={q}"
                )));
            }
            b_vec.copy_from_slice(b);
        }
        n => return Err(Error::dim("CARMA b", format!("{} or {p}", q + 1), n)),
    }
    if b_vec.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("CARMA b has non-finite entries".into()));
    }
    if b_vec[q] != 1.0 {
        return Err(Error::Parameter(format!("CARMA b_q must equal 1, got {}", b_vec[q])));
    }

    let mut a = DenseMatrix::zeros(p, p);
    for i in 0..p - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..p {
        a[(p - 1, j)] = -alpha[p - 1 - j];
    }
    let mut e_p = vec![0.0; p];
    e_p[p - 1] = 1.0;
    Ok((a, b_vec, e_p))
}
