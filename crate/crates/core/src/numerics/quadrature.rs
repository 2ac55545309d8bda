// SPDX-License-Identifier: Apache-2.0

//! Adaptive Simpson quadrature for scalar and vector integrands.

use crate::error::{Error, Result};

pub const DEFAULT_ABS_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 50;
const MAX_EVALS: usize = 2_000_000;

/// `∫_a^b f(s) ds` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let v = adaptive_simpson_vec(|s| vec![f(s)], 1, a, b, tol)?;
    Ok(v[0])
}

/// Componentwise `∫_a^b f(s) ds` for a `dim`-vector integrand; the error
/// criterion is the max-norm over components.
pub fn adaptive_simpson_vec<F: Fn(f64) -> Vec<f64>>(
    f: F,
    dim: usize,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("quadrature bounds [{a}, {b}] not finite")));
    }
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut evals = 0usize;
    let mut eval = |s: f64| -> Result<Vec<f64>> {
        evals += 1;
        if evals > MAX_EVALS {
            return Err(Error::Numeric {
                context: "adaptive Simpson exceeded evaluation budget".into(),
                residual: f64::NAN,
            });
        }
        let v = f(s);
        if v.len() != dim {
            return Err(Error::dim("quadrature integrand", dim, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("integrand not finite at {s}")));
        }
        Ok(v)
    };

    // Seed with a few panels so narrow features are not missed.
    const PANELS: usize = 8;
    let h = (hi - lo) / PANELS as f64;
    let mut total = vec![0.0; dim];
    let mut err_total = 0.0;
    for p in 0..PANELS {
        let x0 = lo + p as f64 * h;
        let x1 = if p + 1 == PANELS { hi } else { x0 + h };
        let fa = eval(x0)?;
        let fb = eval(x1)?;
        let m = 0.5 * (x0 + x1);
        let fm = eval(m)?;
        let whole = simpson(x0, x1, &fa, &fm, &fb);
        let (v, e) = recurse(&mut eval, x0, x1, &fa, &fm, &fb, &whole, tol / PANELS as f64, 0)?;
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
        err_total += e;
    }
    if err_total > 10.0 * tol {
        return Err(Error::Numeric {
            context: "adaptive Simpson did not reach tolerance".into(),
            residual: err_total,
        });
    }
    Ok(total.into_iter().map(|x| sign * x).collect())
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let w = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((x, y), z)| w * (x + 4.0 * y + z))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn recurse<E: FnMut(f64) -> Result<Vec<f64>>>(
    eval: &mut E,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
) -> Result<(Vec<f64>, f64)> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(lm)?;
    let frm = eval(rm)?;
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);
    let err = left
        .iter()
        .zip(&right)
        .zip(whole)
        .fold(0.0f64, |e, ((l, r), w)| e.max((l + r - w).abs()));
    if err <= 15.0 * tol || depth >= MAX_DEPTH {
        let v = left
            .iter()
            .zip(&right)
            .zip(whole)
            .map(|((l, r), w)| l + r + (l + r - w) / 15.0)
            .collect();
        // Depth exhaustion is reported through the accumulated error.
        let e = if err <= 15.0 * tol { err / 15.0 } else { err };
        return Ok((v, e));
    }
    let (lv, le) = recurse(eval, a, m, fa, &flm, fm, &left, tol / 2.0, depth + 1)?;
    let (rv, re) = recurse(eval, m, b, fm, &frm, fb, &right, tol / 2.0, depth + 1)?;
    Ok((lv.iter().zip(&rv).map(|(x, y)| x + y).collect(), le + re))
}

/// Composite trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}
