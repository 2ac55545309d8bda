// SPDX-License-Identifier: Apache-2.0

//! Curve-valued dynamics recorded through linear functionals.
//!
//! Both the spread OU mild solution and the three-factor model are
//! stochastic convolutions `∫_0^t K(t - s + x) dL(s)` in maturity, so a
//! linear functional `ℓ` of the curve is an LS field with scalar kernel
//! `u ↦ ℓ(K(· + u))`. They are simulated with the LS convolution engine.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::{check_maturities, filipovic_inner, CurveGrid, OperatorOutput, Pchip, WeightSpec};
use super::{BlockCurveOperator, CurveBlock};
use crate::error::{Error, Result};
use crate::factor_models::{psi_integral, DriverSpec, FactorModel, KernelFn, LsKernel, Start};
use crate::numerics::quadrature::trapezoid;
use crate::numerics::DenseMatrix;
use crate::simulation::{fmt_num, simulate, simulate_ls_field_with_step, PathEnsemble, TimeGrid};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SurfaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const LIPSCHITZ_SAMPLES: usize = 2048;
const NORM_BOUND: f64 = 1e12;

/// A function of maturity: either a grid curve (interpolated, flat
/// beyond `X_max`) or a closed-form function.
#[derive(Clone)]
pub struct CurveSource {
    inner: SourceKind,
    tag: String,
}

#[derive(Clone)]
enum SourceKind {
    Curve(Pchip),
    Function(ScalarFn),
}

impl fmt::Debug for CurveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CurveSource({})", self.tag)
    }
}

impl CurveSource {
    pub fn curve(c: &CurveGrid) -> Self {
        Self {
            inner: SourceKind::Curve(c.interpolant()),
            tag: format!("curve:{}", values_digest(c.values())),
        }
    }

    /// `label` identifies the function in ensemble digests.
    pub fn function(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            inner: SourceKind::Function(Arc::new(f)),
            tag: format!("fn:{}", label.into()),
        }
    }

    pub fn zero() -> Self {
        Self::function("zero", |_| 0.0)
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.inner {
            SourceKind::Curve(p) => p.eval(y),
            SourceKind::Function(f) => f(y),
        }
    }
}

fn values_digest(v: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in v {
        h.update(x.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Linear functional of a curve used for recording.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveFunctional {
    /// `f(x)`.
    Eval(f64),
    /// `Σ w_k f(x_k)`.
    Weighted(Vec<(f64, f64)>),
    /// Mean over `[0, X_max]`.
    Mean,
    /// `(h, f)_w`.
    Inner(CurveGrid),
}

impl CurveFunctional {
    pub fn label(&self) -> String {
        match self {
            CurveFunctional::Eval(x) => format!("eval({})", fmt_num(*x)),
            CurveFunctional::Weighted(p) => {
                let parts: Vec<String> = p.iter().map(|(x, w)| format!("{}@{}", fmt_num(*w), fmt_num(*x))).collect();
                format!("weighted({})", parts.join(";"))
            }
            CurveFunctional::Mean => "mean".into(),
            CurveFunctional::Inner(h) => format!("inner({})", values_digest(h.values())),
        }
    }

    pub fn apply(&self, f: &CurveGrid) -> Result<f64> {
        let c = compile(self, f.grid(), f.weight())?;
        Ok(c.apply_values(f.x(), |y| f.eval(y), 0.0))
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Points(Vec<(f64, f64)>),
    /// Coefficients on the grid values.
    Grid(Vec<f64>),
}

impl Compiled {
    /// `ℓ(y ↦ src(y + u))`.
    fn apply_values(&self, x: &[f64], src: impl Fn(f64) -> f64, u: f64) -> f64 {
        match self {
            Compiled::Points(p) => p.iter().map(|(xk, w)| w * src(xk + u)).sum(),
            Compiled::Grid(c) => x.iter().zip(c).filter(|(_, c)| **c != 0.0).map(|(xk, c)| c * src(xk + u)).sum(),
        }
    }
}

fn compile(f: &CurveFunctional, x: &Arc<Vec<f64>>, weight: WeightSpec) -> Result<Compiled> {
    let x_max = *x.last().unwrap();
    let in_range = |p: f64| -> Result<()> {
        if !(p >= 0.0 && p <= x_max) {
            return Err(Error::Range(format!("evaluation point {p} outside [0, {x_max}]")));
        }
        Ok(())
    };
    match f {
        CurveFunctional::Eval(p) => {
            in_range(*p)?;
            Ok(Compiled::Points(vec![(*p, 1.0)]))
        }
        CurveFunctional::Weighted(pts) => {
            for (p, _) in pts {
                in_range(*p)?;
            }
            Ok(Compiled::Points(pts.clone()))
        }
        CurveFunctional::Mean => {
            let n = x.len();
            let mut c = vec![0.0; n];
            for k in 0..n - 1 {
                let h = 0.5 * (x[k + 1] - x[k]) / x_max;
                c[k] += h;
                c[k + 1] += h;
            }
            Ok(Compiled::Grid(c))
        }
        CurveFunctional::Inner(h) => {
            if !(h.x() == x.as_slice() && h.weight() == weight) {
                return Err(Error::Parameter("test curve lives on a different grid or weight".into()));
            }
            let n = x.len();
            let c = (0..n)
                .map(|k| {
                    let mut e = vec![0.0; n];
                    e[k] = 1.0;
                    let unit = CurveGrid::new(x.clone(), e, weight)?;
                    filipovic_inner(h, &unit)
                })
                .collect::<Result<_>>()?;
            Ok(Compiled::Grid(c))
        }
    }
}

/// What a curve simulation records per time.
#[derive(Debug, Clone, PartialEq)]
pub enum Recording {
    /// Every grid point.
    Curve,
    Points(Vec<f64>),
    Functionals(Vec<CurveFunctional>),
}

impl Recording {
    fn functionals(&self, x: &[f64]) -> Vec<CurveFunctional> {
        match self {
            Recording::Curve => x.iter().map(|p| CurveFunctional::Eval(*p)).collect(),
            Recording::Points(p) => p.iter().map(|p| CurveFunctional::Eval(*p)).collect(),
            Recording::Functionals(f) => f.clone(),
        }
    }

    fn points(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Recording::Curve => Some(x.to_vec()),
            Recording::Points(p) => Some(p.clone()),
            Recording::Functionals(_) => None,
        }
    }
}

/// Recorded functionals of curve-valued paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEnsemble {
    pub grid: TimeGrid,
    pub labels: Vec<String>,
    /// Maturities when every functional is a point evaluation.
    pub points: Option<Vec<f64>>,
    pub n_paths: usize,
    /// `[path][time][functional]`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub x_grid: Arc<Vec<f64>>,
    pub weight: WeightSpec,
    pub digest: String,
}

impl CurveEnsemble {
    pub fn n_functionals(&self) -> usize {
        self.labels.len()
    }

    pub fn value(&self, path: usize, t_index: usize, k: usize) -> f64 {
        let nf = self.n_functionals();
        self.values[(path * self.grid.len() + t_index) * nf + k]
    }

    /// Functional `k` at time index `t_index` across paths.
    pub fn series(&self, t_index: usize, k: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.value(p, t_index, k)).collect()
    }

    /// Pathwise difference, e.g. a spread `X_1 - X_2`.
    pub fn sub(&self, other: &CurveEnsemble) -> Result<CurveEnsemble> {
        if self.labels != other.labels || self.grid != other.grid || self.n_paths != other.n_paths {
            return Err(Error::Parameter("curve ensembles are not aligned".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a -= b;
        }
        out.digest = format!("{}-{}", self.digest, other.digest);
        Ok(out)
    }

    /// `t,path,x,value` when recording points, `t,path,functional,value`
    /// otherwise.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let keys: Vec<String> = match &self.points {
            Some(p) => {
                writeln!(w, "t,path,x,value")?;
                p.iter().map(|x| fmt_num(*x)).collect()
            }
            None => {
                writeln!(w, "t,path,functional,value")?;
                self.labels.clone()
            }
        };
        for p in 0..self.n_paths {
            for (ti, t) in self.grid.points().iter().enumerate() {
                for (k, key) in keys.iter().enumerate() {
                    writeln!(w, "{},{p},{key},{}", fmt_num(*t), fmt_num(self.value(p, ti, k)))?;
                }
            }
        }
        Ok(())
    }

    /// Weight, maturity grid and run identifiers as `key: value` lines.
    pub fn write_meta<W: Write>(&self, mut w: W) -> Result<()> {
        let x = &self.x_grid;
        writeln!(w, "weight: exponential")?;
        writeln!(w, "weight_alpha: {}", fmt_num(self.weight.alpha()))?;
        writeln!(w, "grid_points: {}", x.len())?;
        writeln!(w, "grid_x_max: {}", fmt_num(*x.last().unwrap()))?;
        let xs: Vec<String> = x.iter().map(|v| fmt_num(*v)).collect();
        writeln!(w, "grid_x: {}", xs.join(" "))?;
        writeln!(w, "functionals: {}", self.labels.join(" "))?;
        writeln!(w, "n_paths: {}", self.n_paths)?;
        writeln!(w, "seed: {}", self.seed)?;
        writeln!(w, "digest: {}", self.digest)?;
        Ok(())
    }
}

/// Numerical Lipschitz bound of `k` on `[0, t_max]`, padded by half.
fn estimate_lipschitz(k: &(dyn Fn(f64) -> DenseMatrix + Send + Sync), t_max: f64) -> f64 {
    let h = t_max / LIPSCHITZ_SAMPLES as f64;
    let mut prev = k(0.0);
    let mut best: f64 = 0.0;
    for i in 1..=LIPSCHITZ_SAMPLES {
        let cur = k(i as f64 * h);
        let d = prev
            .as_slice()
            .iter()
            .zip(cur.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.max(d / h);
        prev = cur;
    }
    1.5 * best
}

type MatrixFn = Arc<dyn Fn(f64) -> DenseMatrix + Send + Sync>;

#[allow(clippy::too_many_arguments)]
fn run_field(
    rows: usize,
    cols: usize,
    kernel: MatrixFn,
    label: String,
    driver: &DriverSpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let t_max = grid.points().last().copied().unwrap_or(0.0).max(1e-9);
    let lip = estimate_lipschitz(kernel.as_ref(), t_max);
    let k = kernel.clone();
    let kf = KernelFn::custom(label, rows, cols, move |u| k(u));
    let ls = LsKernel::one_sided_window(kf, driver.clone(), t_max, lip);
    simulate_ls_field_with_step(&ls, &[0.0], grid, n_paths, seed, None)
}

/// Mild solution `g(t) = S(t) g0 + Σ_j ∫_0^t S(t - s) vol_j dL_j(s)`
/// recorded through `rec`.
pub fn simulate_spread_ou(
    g0: &CurveGrid,
    vols: &[CurveGrid],
    driver: &DriverSpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    rec: &Recording,
) -> Result<CurveEnsemble> {
    if vols.is_empty() {
        return Err(Error::Parameter("spread dynamics needs at least one vol curve".into()));
    }
    for v in vols {
        g0.require_same(v)?;
    }
    if driver.dim() != vols.len() {
        return Err(Error::dim("driver dimension vs vol curves", vols.len(), driver.dim()));
    }
    let x = g0.grid().clone();
    let funcs = rec.functionals(&x);
    let compiled: Vec<Compiled> = funcs.iter().map(|f| compile(f, &x, g0.weight())).collect::<Result<_>>()?;
    let sources: Vec<CurveSource> = vols.iter().map(CurveSource::curve).collect();
    let (rows, cols) = (funcs.len(), vols.len());
    let kernel: MatrixFn = {
        let (x, compiled, sources) = (x.clone(), compiled.clone(), sources.clone());
        Arc::new(move |u| {
            let mut m = DenseMatrix::zeros(rows, cols);
            for (r, c) in compiled.iter().enumerate() {
                for (j, s) in sources.iter().enumerate() {
                    m[(r, j)] = c.apply_values(&x, |y| s.eval(y), u);
                }
            }
            m
        })
    };
    let tags: Vec<&str> = sources.iter().map(|s| s.tag.as_str()).collect();
    let label = format!("spread_ou[{}]", tags.join(","));
    let field = run_field(rows, cols, kernel, label, driver, grid, n_paths, seed)?;
    let g0s = CurveSource::curve(g0);
    let offsets: Vec<Vec<f64>> = grid
        .points()
        .iter()
        .map(|t| compiled.iter().map(|c| c.apply_values(&x, |y| g0s.eval(y), *t)).collect())
        .collect();
    let mut values = field.values;
    add_offsets(&mut values, &offsets, rows);
    Ok(CurveEnsemble {
        grid: grid.clone(),
        labels: funcs.iter().map(|f| f.label()).collect(),
        points: rec.points(&x),
        n_paths,
        values,
        seed,
        weight: g0.weight(),
        digest: format!("{}:g0={}", field.model_digest, values_digest(g0.values())),
        x_grid: x,
    })
}

fn add_offsets(values: &mut [f64], offsets: &[Vec<f64>], nf: usize) {
    let per_path = offsets.len() * nf;
    for chunk in values.chunks_mut(per_path) {
        for (ti, off) in offsets.iter().enumerate() {
            for (v, o) in chunk[ti * nf..(ti + 1) * nf].iter_mut().zip(off) {
                *v += o;
            }
        }
    }
}

/// Spread inputs `g0 = Σ_i w_i f0_i` and `vol_j = Σ_i w_i vol_ij` for an
/// operator of scalar blocks. Other blocks have no curve dynamics here.
pub fn spread_inputs(
    op: &BlockCurveOperator,
    f0: &[CurveGrid],
    vols: &[Vec<CurveGrid>],
) -> Result<(CurveGrid, Vec<CurveGrid>)> {
    if op.scalar_weights().is_none() {
        let kinds: Vec<&str> = op
            .blocks
            .iter()
            .map(|b| match b {
                CurveBlock::Scalar(_) => "scalar",
                CurveBlock::Eval(_) => "eval",
                CurveBlock::Weighted(_) => "weighted",
                CurveBlock::Integral => "integral",
            })
            .collect();
        return Err(Error::Unsupported(format!(
            "spread dynamics need scalar blocks commuting with d/dx, got [{}]",
            kinds.join(", ")
        )));
    }
    if vols.len() != f0.len() {
        return Err(Error::dim("vol curve lists", f0.len(), vols.len()));
    }
    let k = vols.first().map(|v| v.len()).unwrap_or(0);
    if vols.iter().any(|v| v.len() != k) || k == 0 {
        return Err(Error::Parameter("every curve needs the same nonzero number of vol curves".into()));
    }
    let g0 = match super::apply_coint_operator(op, f0)? {
        OperatorOutput::Curve(c) => c,
        OperatorOutput::Scalar(_) => unreachable!("scalar blocks give curves"),
    };
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<CurveGrid> = vols.iter().map(|v| v[j].clone()).collect();
        match super::apply_coint_operator(op, &col)? {
            OperatorOutput::Curve(c) => out.push(c),
            OperatorOutput::Scalar(_) => unreachable!("scalar blocks give curves"),
        }
    }
    Ok((g0, out))
}

/// `X_k(t, x) = h_k(t, x) + ∫_0^t g_k(t + x - s) dU_k(s)` for `k = 1, 2` and
/// a scalar Lévy factor `X_3 = L`.
#[derive(Clone)]
pub struct ThreeFactorSpec {
    pub h1: SurfaceFn,
    pub h2: SurfaceFn,
    pub g1: CurveSource,
    pub g2: CurveSource,
    /// Two-dimensional driver `(U_1, U_2)`.
    pub u_driver: DriverSpec,
    pub l_driver: DriverSpec,
    pub x_grid: Arc<Vec<f64>>,
    pub weight: WeightSpec,
    /// Enters the ensemble digests; should identify `h_1` and `h_2`.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeFactorEnsemble {
    pub x1: CurveEnsemble,
    pub x2: CurveEnsemble,
    /// Scalar paths of `L`.
    pub x3: PathEnsemble,
}

impl ThreeFactorEnsemble {
    pub fn spread(&self) -> Result<CurveEnsemble> {
        self.x1.sub(&self.x2)
    }
}

/// `∫_0^T |g(s + ·)|_w^2 ds` on the grid.
fn kernel_norm_mass(g: &CurveSource, x: &Arc<Vec<f64>>, weight: WeightSpec, t_max: f64) -> Result<f64> {
    let n = 256;
    let s: Vec<f64> = (0..=n).map(|i| t_max * i as f64 / n as f64).collect();
    let mut sq = Vec::with_capacity(s.len());
    for si in &s {
        let c = CurveGrid::new(x.clone(), x.iter().map(|v| g.eval(v + si)).collect(), weight)
            .map_err(|_| Error::Precondition("kernel is not finite on the curve grid".into()))?;
        sq.push(filipovic_inner(&c, &c)?);
    }
    Ok(trapezoid(&s, &sq))
}

pub fn three_factor_curves(
    spec: &ThreeFactorSpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    rec: &Recording,
) -> Result<ThreeFactorEnsemble> {
    check_maturities(&spec.x_grid)?;
    if spec.u_driver.dim() != 2 {
        return Err(Error::dim("U driver", 2, spec.u_driver.dim()));
    }
    if spec.l_driver.dim() != 1 {
        return Err(Error::dim("L driver", 1, spec.l_driver.dim()));
    }
    let x = spec.x_grid.clone();
    let t_max = grid.points().last().copied().unwrap_or(0.0);
    for (k, g) in [&spec.g1, &spec.g2].iter().enumerate() {
        let mass = kernel_norm_mass(g, &x, spec.weight, t_max)?;
        if !(mass.is_finite() && mass <= NORM_BOUND) {
            return Err(Error::Precondition(format!(
                "kernel g{} fails the norm-integrability check: mass {mass:e}",
                k + 1
            )));
        }
    }
    let funcs = rec.functionals(&x);
    let compiled: Vec<Compiled> = funcs.iter().map(|f| compile(f, &x, spec.weight)).collect::<Result<_>>()?;
    let nf = funcs.len();
    let kernel: MatrixFn = {
        let (x, compiled, g1, g2) = (x.clone(), compiled.clone(), spec.g1.clone(), spec.g2.clone());
        Arc::new(move |u| {
            let mut m = DenseMatrix::zeros(2 * nf, 2);
            for (r, c) in compiled.iter().enumerate() {
                m[(r, 0)] = c.apply_values(&x, |y| g1.eval(y), u);
                m[(nf + r, 1)] = c.apply_values(&x, |y| g2.eval(y), u);
            }
            m
        })
    };
    let label = format!("three_factor[{};{};{}]", spec.label, spec.g1.tag, spec.g2.tag);
    let field = run_field(2 * nf, 2, kernel, label, &spec.u_driver, grid, n_paths, seed)?;

    let mut v1 = Vec::with_capacity(n_paths * grid.len() * nf);
    let mut v2 = Vec::with_capacity(n_paths * grid.len() * nf);
    for chunk in field.values.chunks(2 * nf) {
        v1.extend_from_slice(&chunk[..nf]);
        v2.extend_from_slice(&chunk[nf..]);
    }
    let offsets = |h: &SurfaceFn| -> Vec<Vec<f64>> {
        grid.points()
            .iter()
            .map(|t| compiled.iter().map(|c| c.apply_values(&x, |y| h(*t, y), 0.0)).collect())
            .collect()
    };
    add_offsets(&mut v1, &offsets(&spec.h1), nf);
    add_offsets(&mut v2, &offsets(&spec.h2), nf);
    let make = |values: Vec<f64>, tag: &str| CurveEnsemble {
        grid: grid.clone(),
        labels: funcs.iter().map(|f| f.label()).collect(),
        points: rec.points(&x),
        n_paths,
        values,
        seed,
        x_grid: x.clone(),
        weight: spec.weight,
        digest: format!("{}:{tag}", field.model_digest),
    };
    let levy = FactorModel::mv_ou(
        vec![0.0],
        DenseMatrix::zeros(1, 1),
        DenseMatrix::identity(1),
        spec.l_driver.clone(),
        Start::At(vec![0.0]),
    )?;
    let x3 = simulate(&levy, grid, n_paths, seed ^ 0x4c65_7679_0000_0003)?;
    Ok(ThreeFactorEnsemble {
        x1: make(v1, "x1"),
        x2: make(v2, "x2"),
        x3,
    })
}

/// `log E exp(i z (h, X_k(t))_w) = i z (h, h_k(t))_w + ∫_0^t ψ_{U_k}(z (h, g_k(s + ·))_w) ds`,
/// with `U_k` coordinate `component` of `driver`.
pub fn lss_cumulant(
    h: &CurveGrid,
    hk_t: &CurveGrid,
    g: &CurveSource,
    driver: &DriverSpec,
    component: usize,
    t: f64,
    z: f64,
) -> Result<Complex64> {
    if component >= driver.dim() {
        return Err(Error::Range(format!("driver component {component} out of range")));
    }
    let drift = filipovic_inner(h, hk_t)?;
    let x = h.grid().clone();
    let weight = h.weight();
    let k = driver.dim();
    let v = if t > 0.0 {
        psi_integral(
            |s| {
                let c = CurveGrid::new(x.clone(), x.iter().map(|y| g.eval(y + s)).collect(), weight)
                    .expect("finite kernel");
                let mut u = vec![0.0; k];
                u[component] = z * filipovic_inner(h, &c).expect("same space");
                u
            },
            driver,
            t,
        )?
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok(v + Complex64::new(0.0, z * drift))
}
