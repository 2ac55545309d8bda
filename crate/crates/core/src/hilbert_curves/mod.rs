// SPDX-License-Identifier: Apache-2.0

//! Forward curves in a grid-discretized Filipovic space `H_w` with weight
//! `w(x) = e^{α x}`.

mod interp;
mod spread;

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::quadrature::trapezoid;
use crate::numerics::DenseMatrix;
use crate::simulation::fmt_num;

pub(crate) use interp::Pchip;
pub use spread::{
    lss_cumulant, simulate_spread_ou, spread_inputs, SurfaceFn, three_factor_curves, CurveEnsemble,
    CurveFunctional, CurveSource, Recording, ThreeFactorEnsemble, ThreeFactorSpec,
};

pub const DEFAULT_WEIGHT_RATE: f64 = 0.1;
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Stretch of the default geometric grid.
pub const GRID_STRETCH: f64 = 3.0;
const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    alpha: f64,
}

impl WeightSpec {
    pub fn exponential(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("weight rate must be positive, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn w(&self, x: f64) -> f64 {
        (self.alpha * x).exp()
    }

    /// `∫_0^∞ w(x)^{-1} dx`.
    pub fn inverse_mass(&self) -> f64 {
        1.0 / self.alpha
    }
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_WEIGHT_RATE,
        }
    }
}

fn check_maturities(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::Parameter("a curve grid needs at least two points".into()));
    }
    if x[0] != 0.0 {
        return Err(Error::Parameter(format!("curve grid must start at 0, starts at {}", x[0])));
    }
    if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("curve grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `n` points on `[0, x_max]`, denser near 0:
/// `x_i = x_max (e^{κ i/(n-1)} - 1) / (e^κ - 1)`.
pub fn geometric_grid(x_max: f64, n: usize, stretch: f64) -> Result<Vec<f64>> {
    if n < 2 || !(x_max > 0.0 && x_max.is_finite()) || !(stretch > 0.0) {
        return Err(Error::Parameter(format!(
            "geometric grid needs n >= 2, x_max > 0, stretch > 0 (got {n}, {x_max}, {stretch})"
        )));
    }
    let den = stretch.exp_m1();
    let mut x: Vec<f64> = (0..n)
        .map(|i| x_max * (stretch * i as f64 / (n - 1) as f64).exp_m1() / den)
        .collect();
    x[n - 1] = x_max;
    Ok(x)
}

pub fn uniform_grid(x_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::Parameter(format!("uniform grid needs n >= 2 and x_max > 0 (got {n}, {x_max})")));
    }
    let h = x_max / (n - 1) as f64;
    Ok((0..n).map(|i| i as f64 * h).collect())
}

/// Curve values on a maturity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGrid {
    x: Arc<Vec<f64>>,
    values: Vec<f64>,
    weight: WeightSpec,
}

impl CurveGrid {
    pub fn new(x: Arc<Vec<f64>>, values: Vec<f64>, weight: WeightSpec) -> Result<Self> {
        check_maturities(&x)?;
        if values.len() != x.len() {
            return Err(Error::dim("curve values", x.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("curve values must be finite".into()));
        }
        Ok(Self { x, values, weight })
    }

    pub fn from_fn(x: Arc<Vec<f64>>, weight: WeightSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = x.iter().map(|v| f(*v)).collect();
        Self::new(x, values, weight)
    }

    pub fn constant(x: Arc<Vec<f64>>, weight: WeightSpec, c: f64) -> Result<Self> {
        Self::from_fn(x, weight, |_| c)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn grid(&self) -> &Arc<Vec<f64>> {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weight(&self) -> WeightSpec {
        self.weight
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_space(&self, other: &CurveGrid) -> bool {
        (Arc::ptr_eq(&self.x, &other.x) || self.x == other.x) && self.weight == other.weight
    }

    fn require_same(&self, other: &CurveGrid) -> Result<()> {
        if !self.same_space(other) {
            return Err(Error::Parameter("curves live on different grids or weights".into()));
        }
        Ok(())
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            x: self.x.clone(),
            values,
            weight: self.weight,
        }
    }

    pub(crate) fn interpolant(&self) -> Pchip {
        Pchip::new(&self.x, &self.values)
    }

    /// Monotone cubic interpolation; flat beyond the grid.
    pub fn eval(&self, x: f64) -> f64 {
        self.interpolant().eval(x)
    }

    pub fn add(&self, other: &CurveGrid) -> Result<CurveGrid> {
        self.require_same(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &CurveGrid) -> Result<CurveGrid> {
        self.require_same(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, k: f64) -> CurveGrid {
        self.with_values(self.values.iter().map(|v| k * v).collect())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &CurveGrid) -> Result<CurveGrid> {
        self.require_same(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect()))
    }

    /// Three-point finite differences, one-sided at both ends.
    pub fn derivative(&self) -> Vec<f64> {
        finite_difference(&self.x, &self.values)
    }

    pub fn norm(&self) -> f64 {
        filipovic_inner(self, self).expect("same space").max(0.0).sqrt()
    }

    /// `x,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,value")?;
        for (x, v) in self.x.iter().zip(&self.values) {
            writeln!(w, "{},{}", fmt_num(*x), fmt_num(*v))?;
        }
        Ok(())
    }
}

pub(crate) fn finite_difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let s = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![s, s];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        d[i] = -b / (a * (a + b)) * y[i - 1] + (b - a) / (a * b) * y[i] + a / (b * (a + b)) * y[i + 1];
    }
    let (a, b) = (x[1] - x[0], x[2] - x[1]);
    d[0] = -(2.0 * a + b) / (a * (a + b)) * y[0] + (a + b) / (a * b) * y[1] - a / (b * (a + b)) * y[2];
    let (a, b) = (x[n - 1] - x[n - 2], x[n - 2] - x[n - 3]);
    d[n - 1] = (2.0 * a + b) / (a * (a + b)) * y[n - 1] - (a + b) / (a * b) * y[n - 2] + a / (b * (a + b)) * y[n - 3];
    d
}

/// `(f, g)_w = f(0) g(0) + ∫_0^{X_max} w f' g' dx`.
pub fn filipovic_inner(f: &CurveGrid, g: &CurveGrid) -> Result<f64> {
    f.require_same(g)?;
    let df = f.derivative();
    let dg = g.derivative();
    let integrand: Vec<f64> = f
        .x
        .iter()
        .zip(df.iter().zip(&dg))
        .map(|(x, (a, b))| f.weight.w(*x) * a * b)
        .collect();
    Ok(f.values[0] * g.values[0] + trapezoid(&f.x, &integrand))
}

/// `S(t) f = f(t + ·)`, flat beyond `X_max`.
pub fn shift_semigroup(f: &CurveGrid, t: f64) -> Result<CurveGrid> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("shift {t} must be finite and >= 0")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let p = f.interpolant();
    Ok(f.with_values(f.x.iter().map(|x| p.eval(x + t)).collect()))
}

/// One block of a curve operator.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveBlock {
    /// `weight · Id`.
    Scalar(f64),
    /// `δ_x`.
    Eval(f64),
    /// `Σ w_k δ_{x_k}`.
    Weighted(Vec<(f64, f64)>),
    /// Mean over `[0, X_max]`.
    Integral,
}

/// `C = (C_1, ..., C_d)` acting on a tuple of curves.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCurveOperator {
    pub blocks: Vec<CurveBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorOutput {
    Curve(CurveGrid),
    Scalar(f64),
}

impl BlockCurveOperator {
    pub fn new(blocks: Vec<CurveBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Parameter("curve operator needs at least one block".into()));
        }
        let scalar = blocks.iter().filter(|b| matches!(b, CurveBlock::Scalar(_))).count();
        if scalar != 0 && scalar != blocks.len() {
            return Err(Error::Parameter(
                "curve operator mixes curve-valued and scalar-valued blocks".into(),
            ));
        }
        Ok(Self { blocks })
    }

    /// Weights when every block is scalar.
    pub fn scalar_weights(&self) -> Option<Vec<f64>> {
        self.blocks
            .iter()
            .map(|b| match b {
                CurveBlock::Scalar(w) => Some(*w),
                _ => None,
            })
            .collect()
    }
}

fn eval_checked(f: &CurveGrid, x: f64) -> Result<f64> {
    if !(x >= 0.0 && x <= f.x_max()) {
        return Err(Error::Range(format!("evaluation point {x} outside [0, {}]", f.x_max())));
    }
    Ok(f.eval(x))
}

/// Mean of `f` over `[0, X_max]` by trapezoid.
pub fn curve_mean(f: &CurveGrid) -> f64 {
    trapezoid(&f.x, &f.values) / f.x_max()
}

pub fn apply_coint_operator(op: &BlockCurveOperator, curves: &[CurveGrid]) -> Result<OperatorOutput> {
    if curves.len() != op.blocks.len() {
        return Err(Error::dim("curve tuple", op.blocks.len(), curves.len()));
    }
    for c in &curves[1..] {
        curves[0].require_same(c)?;
    }
    if let Some(w) = op.scalar_weights() {
        let mut out = curves[0].scale(w[0]);
        for (c, wi) in curves[1..].iter().zip(&w[1..]) {
            out = out.add(&c.scale(*wi))?;
        }
        return Ok(OperatorOutput::Curve(out));
    }
    let mut total = 0.0;
    for (b, c) in op.blocks.iter().zip(curves) {
        total += match b {
            CurveBlock::Eval(x) => eval_checked(c, *x)?,
            CurveBlock::Weighted(pts) => {
                let mut s = 0.0;
                for (x, w) in pts {
                    s += w * eval_checked(c, *x)?;
                }
                s
            }
            CurveBlock::Integral => curve_mean(c),
            CurveBlock::Scalar(_) => unreachable!("validated at construction"),
        };
    }
    Ok(OperatorOutput::Scalar(total))
}

/// Element of a product of Filipovic spaces.
pub type CurveTuple = Vec<CurveGrid>;

pub fn tuple_inner(a: &[CurveGrid], b: &[CurveGrid]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("curve tuple", a.len(), b.len()));
    }
    a.iter().zip(b).map(|(f, g)| filipovic_inner(f, g)).sum()
}

fn check_orthonormal(basis: &[CurveTuple], what: &str) -> Result<()> {
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = tuple_inner(a, b)?;
            if (got - want).abs() > ORTHONORMAL_TOL {
                return Err(Error::Precondition(format!(
                    "{what} basis is not orthonormal: <{i},{j}> = {got}"
                )));
            }
        }
    }
    Ok(())
}

/// `C P X = Σ_ij <X, f_j> <P f_j, h_i> C h_i` in coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FdrReduction {
    /// `P̄_ij = <P f_j, h_i>`.
    pub p_bar: DenseMatrix,
    /// `<X_t, f_j>`.
    pub x_vec: Vec<f64>,
    /// `C h_i`.
    pub c_curves: Vec<CurveTuple>,
}

impl FdrReduction {
    /// `Σ_ij x_j P̄_ij C h_i`.
    pub fn reconstruct(&self) -> Result<CurveTuple> {
        let coef = self.p_bar.matvec(&self.x_vec)?;
        let mut out: CurveTuple = self.c_curves[0].iter().map(|c| c.scale(coef[0])).collect();
        for (k, ch) in self.c_curves.iter().enumerate().skip(1) {
            for (o, c) in out.iter_mut().zip(ch) {
                *o = o.add(&c.scale(coef[k]))?;
            }
        }
        Ok(out)
    }
}

/// Finite-dimensional coordinates of `C P X_t` from orthonormal bases
/// `{f_j}` of `(ker P)^⊥` and `{h_i}` of `(ker C)^⊥` and their images.
pub fn fdr_reduce(
    f_basis: &[CurveTuple],
    p_images: &[CurveTuple],
    h_basis: &[CurveTuple],
    c_images: &[CurveTuple],
    x_t: &[CurveGrid],
) -> Result<FdrReduction> {
    if f_basis.is_empty() || h_basis.is_empty() {
        return Err(Error::Parameter("finite-rank operators need nonempty bases".into()));
    }
    if p_images.len() != f_basis.len() {
        return Err(Error::dim("images P f_j", f_basis.len(), p_images.len()));
    }
    if c_images.len() != h_basis.len() {
        return Err(Error::dim("images C h_i", h_basis.len(), c_images.len()));
    }
    check_orthonormal(f_basis, "factor")?;
    check_orthonormal(h_basis, "price")?;
    let (d, n) = (h_basis.len(), f_basis.len());
    let mut p_bar = DenseMatrix::zeros(d, n);
    for i in 0..d {
        for j in 0..n {
            p_bar[(i, j)] = tuple_inner(&p_images[j], &h_basis[i])?;
        }
    }
    let x_vec = f_basis.iter().map(|f| tuple_inner(x_t, f)).collect::<Result<_>>()?;
    Ok(FdrReduction {
        p_bar,
        x_vec,
        c_curves: c_images.to_vec(),
    })
}

/// Rescaling constant `c = sqrt(1 + 4 (1 + 1/α))` making `c |·|_w`
/// submultiplicative: `|f|_∞^2 <= (1 + 1/α) |f|_w^2` and
/// `|fg|_w^2 <= (1 + 4 (1 + 1/α)) |f|_w^2 |g|_w^2`.
pub fn banach_constant(weight: WeightSpec) -> f64 {
    (1.0 + 4.0 * (1.0 + weight.inverse_mass())).sqrt()
}

/// `max |fg|_w / (|f|_w |g|_w)` over all ordered pairs of the corpus.
pub fn max_product_ratio(corpus: &[CurveGrid]) -> Result<f64> {
    let norms: Vec<f64> = corpus.iter().map(|f| f.norm()).collect();
    let mut best: f64 = 0.0;
    for (i, f) in corpus.iter().enumerate() {
        for (j, g) in corpus.iter().enumerate().skip(i) {
            let den = norms[i] * norms[j];
            if den > 0.0 {
                best = best.max(f.mul(g)?.norm() / den);
            }
        }
    }
    Ok(best)
}
