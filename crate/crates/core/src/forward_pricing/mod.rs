// SPDX-License-Identifier: Apache-2.0

//! Forward prices under a pricing measure in the Musiela parametrization
//! `f(t, x) = F(t, t + x)`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_models::{DriverSpec, FactorModel, LsKernel};
use crate::numerics::quadrature::{adaptive_simpson, adaptive_simpson_vec, DEFAULT_ABS_TOL};
use crate::numerics::{dot, integrate_mat_exp, mat_exp, DenseMatrix};
use crate::pricing_system::{PricingSystem, ZERO_TOL};
use crate::simulation::fmt_num;

pub type MatrixFn = Arc<dyn Fn(f64) -> DenseMatrix + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
enum Semigroup {
    Exp(DenseMatrix),
    Custom(MatrixFn),
}

#[derive(Clone)]
enum Drift {
    /// `a(τ) = ∫_0^τ A(s) mu ds`.
    Constant(Vec<f64>),
    /// `a(t, T) = ∫_t^T A(T - s) mu(s) ds`.
    TimeVarying(VectorFn),
    /// `a(τ)` given directly.
    Custom(VectorFn),
}

/// `E_Q[X(T) | F_t] = A(t, T) X(t) + a(t, T)`.
#[derive(Clone)]
pub struct AffineKernel {
    n: usize,
    semigroup: Semigroup,
    drift: Drift,
}

impl fmt::Debug for AffineKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineKernel")
            .field("n", &self.n)
            .field("homogeneous", &self.is_homogeneous())
            .finish()
    }
}

impl AffineKernel {
    /// `A(τ) = e^{Cτ}` and `a(τ) = ∫_0^τ e^{Cs} mu ds`.
    pub fn from_ou(c: DenseMatrix, mu: Vec<f64>) -> Result<Self> {
        let n = c.require_square("kernel generator")?;
        if mu.len() != n {
            return Err(Error::dim("kernel drift", n, mu.len()));
        }
        Ok(Self {
            n,
            semigroup: Semigroup::Exp(c),
            drift: Drift::Constant(mu),
        })
    }

    /// Time-dependent drift `mu(s)`; the kernel is no longer homogeneous.
    pub fn with_time_dependent_drift(c: DenseMatrix, mu: VectorFn) -> Result<Self> {
        let n = c.require_square("kernel generator")?;
        let probe = mu(0.0);
        if probe.len() != n {
            return Err(Error::dim("kernel drift", n, probe.len()));
        }
        Ok(Self {
            n,
            semigroup: Semigroup::Exp(c),
            drift: Drift::TimeVarying(mu),
        })
    }

    /// Homogeneous kernel from user-supplied `A(τ)` and `a(τ)`.
    pub fn custom(n: usize, big_a: MatrixFn, small_a: VectorFn) -> Result<Self> {
        let a0 = big_a(0.0);
        if a0.rows() != n || a0.cols() != n {
            return Err(Error::dim("kernel A(0) size", n, a0.rows()));
        }
        if a0.sub(&DenseMatrix::identity(n))?.max_abs() > ZERO_TOL {
            return Err(Error::Parameter("kernel A(0) must be the identity".into()));
        }
        let v0 = small_a(0.0);
        if v0.len() != n || v0.iter().any(|v| v.abs() > ZERO_TOL) {
            return Err(Error::Parameter("kernel a(0) must vanish".into()));
        }
        Ok(Self {
            n,
            semigroup: Semigroup::Custom(big_a),
            drift: Drift::Custom(small_a),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_homogeneous(&self) -> bool {
        !matches!(self.drift, Drift::TimeVarying(_))
    }

    /// `A(τ)`.
    pub fn big_a(&self, tau: f64) -> Result<DenseMatrix> {
        check_tau(tau)?;
        match &self.semigroup {
            Semigroup::Exp(c) => mat_exp(c, tau),
            Semigroup::Custom(f) => Ok(f(tau)),
        }
    }

    /// `a(t, T)`; `t` is ignored for homogeneous kernels.
    pub fn small_a(&self, t: f64, big_t: f64) -> Result<Vec<f64>> {
        let tau = big_t - t;
        check_tau(tau)?;
        match &self.drift {
            Drift::Constant(mu) => match &self.semigroup {
                Semigroup::Exp(c) => integrate_mat_exp(c, mu, tau),
                Semigroup::Custom(_) => unreachable!("custom kernels carry their own drift"),
            },
            Drift::Custom(f) => Ok(f(tau)),
            Drift::TimeVarying(mu) => {
                if tau == 0.0 {
                    return Ok(vec![0.0; self.n]);
                }
                let c = match &self.semigroup {
                    Semigroup::Exp(c) => c,
                    Semigroup::Custom(_) => unreachable!("time-varying drift uses a generator"),
                };
                adaptive_simpson_vec(
                    |s| {
                        let e = mat_exp(c, big_t - s).expect("finite exponent");
                        e.matvec_unchecked(&mu(s))
                    },
                    self.n,
                    t,
                    big_t,
                    DEFAULT_ABS_TOL,
                )
            }
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("time to maturity {tau} must be finite and >= 0")));
    }
    Ok(())
}

/// Generator and drift of a linear model without trend, stacked over
/// composite blocks.
fn linear_parts(model: &FactorModel) -> Result<(DenseMatrix, Vec<f64>)> {
    match model {
        FactorModel::DriftedBm(b) => Ok((DenseMatrix::zeros(b.mu.len(), b.mu.len()), b.mu.clone())),
        FactorModel::MvOu(o) => {
            if o.trend.as_ref().is_some_and(|t| t.iter().any(|v| *v != 0.0)) {
                return Err(Error::Unsupported(
                    "affine kernel for an mv_ou model with a deterministic trend".into(),
                ));
            }
            Ok((o.c.clone(), o.mu.clone()))
        }
        FactorModel::Composite(blocks) => {
            let mut cs = Vec::new();
            let mut mu = Vec::new();
            for b in blocks {
                let (c, m) = linear_parts(b)?;
                cs.push(c);
                mu.extend(m);
            }
            let refs: Vec<&DenseMatrix> = cs.iter().collect();
            Ok((DenseMatrix::block_diag(&refs), mu))
        }
        other => Err(Error::Unsupported(format!("affine kernel for {} models", other.tag()))),
    }
}

/// Affine kernel of an OU-type model (mv_ou, drifted BM, or a composite of
/// these): `A(τ) = e^{Cτ}`, `a(τ) = ∫_0^τ e^{Cs} mu ds`.
pub fn affine_kernel_ou(model: &FactorModel) -> Result<AffineKernel> {
    let (c, mu) = linear_parts(model)?;
    AffineKernel::from_ou(c, mu)
}

/// As [`affine_kernel_ou`] with the model drift replaced by `mu(s)`.
pub fn affine_kernel_ou_time_dependent(model: &FactorModel, mu: VectorFn) -> Result<AffineKernel> {
    let (c, _) = linear_parts(model)?;
    AffineKernel::with_time_dependent_drift(c, mu)
}

/// `d x |x_grid|` forward values observed at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCurve {
    pub t: f64,
    pub x_grid: Vec<f64>,
    /// `values[i][j] = f_i(t, x_j)`.
    pub values: Vec<Vec<f64>>,
}

impl ForwardCurve {
    /// Header `x,f1..fd`, one row per maturity.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.values.len();
        let head: Vec<String> = (1..=d).map(|i| format!("f{i}")).collect();
        writeln!(w, "x,{}", head.join(","))?;
        for (j, x) in self.x_grid.iter().enumerate() {
            let row: Vec<String> = self.values.iter().map(|v| fmt_num(v[j])).collect();
            writeln!(w, "{},{}", fmt_num(*x), row.join(","))?;
        }
        Ok(())
    }

    pub fn at(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }
}

fn check_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() {
        return Err(Error::Parameter("maturity grid is empty".into()));
    }
    if x_grid.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::Domain("maturities must be finite and >= 0".into()));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("maturity grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_sys(sys: &PricingSystem, kernel: &AffineKernel, x_t: &[f64]) -> Result<()> {
    if kernel.dim() != sys.n() {
        return Err(Error::dim("kernel dimension vs pricing matrix columns", sys.n(), kernel.dim()));
    }
    if x_t.len() != sys.n() {
        return Err(Error::dim("factor state", sys.n(), x_t.len()));
    }
    Ok(())
}

fn resolve_t(kernel: &AffineKernel, t: Option<f64>) -> Result<f64> {
    match (kernel.is_homogeneous(), t) {
        (_, Some(t)) if !t.is_finite() => Err(Error::Domain("observation time not finite".into())),
        (true, t) => Ok(t.unwrap_or(0.0)),
        (false, Some(t)) => Ok(t),
        (false, None) => Err(Error::Precondition(
            "non-homogeneous kernel needs the observation time".into(),
        )),
    }
}

fn transpose_rows(cols: Vec<Vec<f64>>, d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// `f(t, x) = P A(x) X_t + P a(t, t + x)` on each maturity.
pub fn forward_curve_affine(
    sys: &PricingSystem,
    kernel: &AffineKernel,
    x_t: &[f64],
    x_grid: &[f64],
    t: Option<f64>,
) -> Result<ForwardCurve> {
    check_sys(sys, kernel, x_t)?;
    check_grid(x_grid)?;
    let t = resolve_t(kernel, t)?;
    let cols: Vec<Vec<f64>> = x_grid
        .par_iter()
        .map(|&x| -> Result<Vec<f64>> {
            let mut y = kernel.big_a(x)?.matvec_unchecked(x_t);
            for (a, b) in y.iter_mut().zip(kernel.small_a(t, t + x)?) {
                *a += b;
            }
            Ok(sys.p.matvec_unchecked(&y))
        })
        .collect::<Result<_>>()?;
    Ok(ForwardCurve {
        t,
        x_grid: x_grid.to_vec(),
        values: transpose_rows(cols, sys.d()),
    })
}

/// `f̄(t, x) = f(t, x) - P a(t, t + x) = P A(x) X_t`.
pub fn detrended_curve(
    sys: &PricingSystem,
    kernel: &AffineKernel,
    x_t: &[f64],
    x_grid: &[f64],
    t: f64,
) -> Result<ForwardCurve> {
    check_sys(sys, kernel, x_t)?;
    check_grid(x_grid)?;
    let cols: Vec<Vec<f64>> = x_grid
        .par_iter()
        .map(|&x| -> Result<Vec<f64>> {
            Ok(sys.p.matvec_unchecked(&kernel.big_a(x)?.matvec_unchecked(x_t)))
        })
        .collect::<Result<_>>()?;
    Ok(ForwardCurve {
        t,
        x_grid: x_grid.to_vec(),
        values: transpose_rows(cols, sys.d()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardCointVerdict {
    Yes,
    No,
    NotApplicable,
}

impl ForwardCointVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            ForwardCointVerdict::Yes => "yes",
            ForwardCointVerdict::No => "no",
            ForwardCointVerdict::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCointCheck {
    pub verdict: ForwardCointVerdict,
    /// `A(x)^T P^T c`, empty when not applicable.
    pub loading: Vec<f64>,
}

/// Whether `c^T P A(x)` loads only the leading `m` coordinates.
pub fn forward_coint_check(sys: &PricingSystem, kernel: &AffineKernel, x: f64) -> Result<ForwardCointCheck> {
    let m = sys.require_m()?;
    let w = sys.factor_loading()?;
    if kernel.dim() != sys.n() {
        return Err(Error::dim("kernel dimension vs pricing matrix columns", sys.n(), kernel.dim()));
    }
    if !kernel.is_homogeneous() {
        return Ok(ForwardCointCheck {
            verdict: ForwardCointVerdict::NotApplicable,
            loading: vec![],
        });
    }
    let loading = kernel.big_a(x)?.tmatvec(&w)?;
    let yes = loading[m..].iter().all(|v| v.abs() <= ZERO_TOL);
    Ok(ForwardCointCheck {
        verdict: if yes { ForwardCointVerdict::Yes } else { ForwardCointVerdict::No },
        loading,
    })
}

/// `E_Q[exp(z^T X(T)) | F_t] = exp(alpha(τ; z)^T X(t) + a(τ; z))` for a
/// Gaussian OU-type model.
#[derive(Debug, Clone)]
pub struct ExpAffineKernel {
    c: DenseMatrix,
    mu: Vec<f64>,
    /// `Σ W_cov Σ^T`.
    q: DenseMatrix,
}

impl ExpAffineKernel {
    pub fn new(c: DenseMatrix, mu: Vec<f64>, sigma: &DenseMatrix, w_cov: &DenseMatrix) -> Result<Self> {
        let n = c.require_square("kernel generator")?;
        if mu.len() != n {
            return Err(Error::dim("kernel drift", n, mu.len()));
        }
        if sigma.rows() != n {
            return Err(Error::dim("sigma rows", n, sigma.rows()));
        }
        if w_cov.rows() != sigma.cols() || w_cov.cols() != sigma.cols() {
            return Err(Error::dim("noise covariance", sigma.cols(), w_cov.rows()));
        }
        let q = sigma.matmul(w_cov)?.matmul(&sigma.transpose())?.symmetrize();
        Ok(Self { c, mu, q })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `A(τ)^T z`.
    pub fn alpha(&self, tau: f64, z: &[f64]) -> Result<Vec<f64>> {
        check_tau(tau)?;
        mat_exp(&self.c, tau)?.tmatvec(z)
    }

    /// `∫_0^τ z^T A(s) mu + ½ z^T A(s) Σ W_cov Σ^T A(s)^T z ds` by adaptive
    /// Simpson.
    pub fn a_scalar(&self, tau: f64, z: &[f64]) -> Result<f64> {
        check_tau(tau)?;
        if z.len() != self.dim() {
            return Err(Error::dim("exponent vector", self.dim(), z.len()));
        }
        if tau == 0.0 {
            return Ok(0.0);
        }
        let ct = self.c.transpose();
        adaptive_simpson(
            |s| {
                let w = mat_exp(&ct, s).expect("finite exponent").matvec_unchecked(z);
                dot(&w, &self.mu) + 0.5 * self.q.quad_form(&w)
            },
            0.0,
            tau,
            DEFAULT_ABS_TOL,
        )
    }
}

/// Exponential-affine kernel of a Gaussian OU-type model, using the
/// driver covariance as `W_cov`.
pub fn exp_affine_kernel_ou(model: &FactorModel) -> Result<ExpAffineKernel> {
    let (c, mu) = linear_parts(model)?;
    let (sigma, cov) = gaussian_noise(model)?;
    ExpAffineKernel::new(c, mu, &sigma, &cov)
}

/// Stacked loading and covariance of the driving Brownian motions.
fn gaussian_noise(model: &FactorModel) -> Result<(DenseMatrix, DenseMatrix)> {
    match model {
        FactorModel::DriftedBm(b) => Ok((b.sigma.clone(), DenseMatrix::identity(b.sigma.cols()))),
        FactorModel::MvOu(o) => {
            if !o.driver.is_gaussian() {
                return Err(Error::Unsupported(
                    "exponential-affine kernel needs a Brownian driver; use the LS forward for jumps".into(),
                ));
            }
            Ok((o.sigma.clone(), o.driver.diffusion_cov().clone()))
        }
        FactorModel::Composite(blocks) => {
            let parts: Vec<(DenseMatrix, DenseMatrix)> = blocks.iter().map(gaussian_noise).collect::<Result<_>>()?;
            let s: Vec<&DenseMatrix> = parts.iter().map(|p| &p.0).collect();
            let c: Vec<&DenseMatrix> = parts.iter().map(|p| &p.1).collect();
            Ok((DenseMatrix::block_diag(&s), DenseMatrix::block_diag(&c)))
        }
        other => Err(Error::Unsupported(format!("exponential-affine kernel for {} models", other.tag()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricForward {
    pub log_forward: Vec<f64>,
    /// `exp(log_forward)`; may be infinite when the log overflows.
    pub forward: Vec<f64>,
}

/// `F_i = exp(alpha(x; P^T e_i)^T X_t + a(x; P^T e_i))` for log-prices
/// `ln S = P X`.
pub fn geometric_forward(
    sys: &PricingSystem,
    expk: &ExpAffineKernel,
    x_t: &[f64],
    x: f64,
) -> Result<GeometricForward> {
    if expk.dim() != sys.n() {
        return Err(Error::dim("kernel dimension vs pricing matrix columns", sys.n(), expk.dim()));
    }
    if x_t.len() != sys.n() {
        return Err(Error::dim("factor state", sys.n(), x_t.len()));
    }
    let log_forward: Vec<f64> = (0..sys.d())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let z = sys.p.row(i);
            Ok(dot(&expk.alpha(x, z)?, x_t) + expk.a_scalar(x, z)?)
        })
        .collect::<Result<_>>()?;
    Ok(GeometricForward {
        forward: log_forward.iter().map(|v| v.exp()).collect(),
        log_forward,
    })
}

/// Lévy factor block `X̂(t) = drift t + L̂(t)` with
/// `κ_Q(u) = u^T drift + κ_L̂(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTail {
    pub drift: Vec<f64>,
    pub driver: DriverSpec,
}

impl LevyTail {
    pub fn new(drift: Vec<f64>, driver: DriverSpec) -> Result<Self> {
        if drift.len() != driver.dim() {
            return Err(Error::dim("Levy tail drift", driver.dim(), drift.len()));
        }
        Ok(Self { drift, driver })
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn kappa(&self, u: &[f64]) -> Result<f64> {
        Ok(dot(u, &self.drift) + self.driver.kappa(u)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsForward {
    pub log_forward: Vec<f64>,
    pub h: Vec<f64>,
}

fn split_checks(sys: &PricingSystem, ls: &LsKernel, tail: &LevyTail, independent: bool) -> Result<usize> {
    if !independent {
        return Err(Error::Precondition(
            "LS forward formula needs the LS driver and the Levy block to be declared independent".into(),
        ));
    }
    let m = ls.out_dim();
    if let Some(sm) = sys.m {
        if sm != m {
            return Err(Error::dim("pricing system m vs LS output dimension", m, sm));
        }
    }
    if m + tail.dim() != sys.n() {
        return Err(Error::dim("LS plus Levy block dimension", sys.n(), m + tail.dim()));
    }
    Ok(m)
}

/// `h_i(x) = ∫_0^x κ_Q(G(s)^T P^{m T} e_i) ds + x κ_Q(P̂^T e_i)`.
pub fn ls_forward_drift(
    sys: &PricingSystem,
    ls: &LsKernel,
    tail: &LevyTail,
    x: f64,
    independent: bool,
) -> Result<Vec<f64>> {
    let m = split_checks(sys, ls, tail, independent)?;
    check_tau(x)?;
    (0..sys.d())
        .map(|i| {
            let row = sys.p.row(i);
            let (pm, ph) = row.split_at(m);
            let head = if x == 0.0 || pm.iter().all(|v| *v == 0.0) {
                0.0
            } else {
                // Probe the domain once on a coarse grid so overflow
                // surfaces as an error instead of a panic inside quadrature.
                for k in 0..=32 {
                    let s = x * k as f64 / 32.0;
                    ls.driver.kappa(&ls.kernel.eval(s).tmatvec(pm)?)?;
                }
                adaptive_simpson(
                    |s| {
                        let u = ls.kernel.eval(s).tmatvec(pm).expect("kernel shape");
                        ls.driver.kappa(&u).unwrap_or(f64::INFINITY)
                    },
                    0.0,
                    x,
                    DEFAULT_ABS_TOL,
                )?
            };
            let tail_part = if tail.dim() == 0 { 0.0 } else { x * tail.kappa(ph)? };
            let h = head + tail_part;
            if !h.is_finite() {
                return Err(Error::Domain(format!("exponential moment undefined for forward {i}")));
            }
            Ok(h)
        })
        .collect()
}

/// `ln f_i(t, x) = e_i^T P^m X̃^m(t, x) + e_i^T P̂ X̂(t) + h_i(x)` given
/// realized `X̃^m(t, x)` and `X̂(t)`.
pub fn ls_forward_log(
    sys: &PricingSystem,
    ls: &LsKernel,
    tail: &LevyTail,
    x: f64,
    x_tilde: &[f64],
    x_hat: &[f64],
    independent: bool,
) -> Result<LsForward> {
    let m = split_checks(sys, ls, tail, independent)?;
    if x_tilde.len() != m {
        return Err(Error::dim("LS field value", m, x_tilde.len()));
    }
    if x_hat.len() != tail.dim() {
        return Err(Error::dim("Levy block value", tail.dim(), x_hat.len()));
    }
    let h = ls_forward_drift(sys, ls, tail, x, independent)?;
    let state: Vec<f64> = x_tilde.iter().chain(x_hat).copied().collect();
    let base = sys.p.matvec_unchecked(&state);
    Ok(LsForward {
        log_forward: base.iter().zip(&h).map(|(a, b)| a + b).collect(),
        h,
    })
}

#[cfg(test)]
mod tests;
