// SPDX-License-Identifier: Apache-2.0

//! Matrix exponential by scaling and squaring with Padé approximants
//! (Higham 2005). Degrees 3..9 are used below their theta thresholds,
//! degree 13 with scaling otherwise.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Returns `exp(M * tau)`.
pub fn mat_exp(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    let n = m.require_square("mat_exp operand")?;
    if !tau.is_finite() {
        return Err(Error::Domain(format!("mat_exp time {tau} is not finite")));
    }
    if tau == 0.0 || n == 0 {
        return Ok(DenseMatrix::identity(n));
    }
    let a = m.scale(tau);
    if n == 1 {
        return DenseMatrix::new(1, 1, vec![a[(0, 0)].exp()]);
    }
    if a.max_abs() == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }
    let norm = a.norm_one();
    let a2 = a.mul_unchecked(&a);
    for (deg, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(&a, &a2, coeffs);
            return solve_pade(&u, &v);
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let a = a.scale(scale);
    let a2 = a2.scale(scale * scale);
    let (u, v) = pade13(&a, &a2);
    let mut r = solve_pade(&u, &v)?;
    for _ in 0..s {
        r = r.mul_unchecked(&r);
    }
    if r.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("matrix exponential overflowed".into()));
    }
    Ok(r)
}

fn lin_comb(terms: &[(f64, &DenseMatrix)], n: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n, n);
    for (c, m) in terms {
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += c * m[(i, j)];
            }
        }
    }
    out
}

fn pade_low(a: &DenseMatrix, a2: &DenseMatrix, b: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let n = a.rows();
    let ident = DenseMatrix::identity(n);
    // Even powers I, A^2, A^4, ...
    let mut powers = vec![ident, a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap().mul_unchecked(a2);
        powers.push(next);
    }
    let odd: Vec<(f64, &DenseMatrix)> = powers
        .iter()
        .enumerate()
        .map(|(k, p)| (b[2 * k + 1], p))
        .collect();
    let even: Vec<(f64, &DenseMatrix)> = powers
        .iter()
        .enumerate()
        .map(|(k, p)| (b[2 * k], p))
        .collect();
    let u = a.mul_unchecked(&lin_comb(&odd, n));
    let v = lin_comb(&even, n);
    (u, v)
}

fn pade13(a: &DenseMatrix, a2: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = a.rows();
    let b = &B13;
    let ident = DenseMatrix::identity(n);
    let a4 = a2.mul_unchecked(a2);
    let a6 = a4.mul_unchecked(a2);
    let u_inner = lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], a2)], n).mul_unchecked(&a6);
    let u_tail = lin_comb(
        &[(b[7], &a6), (b[5], &a4), (b[3], a2), (b[1], &ident)],
        n,
    );
    let u = a.mul_unchecked(&u_inner.add(&u_tail).expect("same shape"));
    let v_inner = lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], a2)], n).mul_unchecked(&a6);
    let v_tail = lin_comb(
        &[(b[6], &a6), (b[4], &a4), (b[2], a2), (b[0], &ident)],
        n,
    );
    let v = v_inner.add(&v_tail).expect("same shape");
    (u, v)
}

fn solve_pade(u: &DenseMatrix, v: &DenseMatrix) -> Result<DenseMatrix> {
    let p = v.add(u)?;
    let q = v.sub(u)?;
    let lu = q.to_na().lu();
    let sol = lu.solve(&p.to_na()).ok_or_else(|| Error::Numeric {
        context: "Padé denominator is singular".into(),
        residual: f64::INFINITY,
    })?;
    Ok(DenseMatrix::from_na(&sol))
}
