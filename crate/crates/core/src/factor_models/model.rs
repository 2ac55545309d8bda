// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::carma::build_carma_state_space;
use super::driver::DriverSpec;
use crate::error::{Error, Result};
use crate::numerics::{eig_real_parts, mat_exp, DenseMatrix};

/// Required tail mass `∫_T^∞ ‖G(s)‖_F^2 ds` beyond the truncation horizon.
pub const KERNEL_TAIL_TOL: f64 = 1e-12;

/// Initial condition of a model instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Deterministic value at time 0.
    At(Vec<f64>),
    /// Two-sided version, started in its stationary law.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftedBm {
    pub mu: Vec<f64>,
    /// `n x k` loading of a standard `k`-dimensional Brownian motion.
    pub sigma: DenseMatrix,
    pub x0: Vec<f64>,
}

/// `dY = (mu + C Y) dt + Σ dL`, observed as `X(t) = Y(t) + trend * t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvOu {
    pub mu: Vec<f64>,
    pub c: DenseMatrix,
    pub sigma: DenseMatrix,
    pub driver: DriverSpec,
    pub start: Start,
    pub trend: Option<Vec<f64>>,
}

/// CARMA(p, q) observed through `Z = b^T Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Carma {
    pub p: usize,
    pub q: usize,
    pub alpha: Vec<f64>,
    /// Padded to length `p`.
    pub b: Vec<f64>,
    pub driver: DriverSpec,
    pub start: Start,
}

/// One term `W e^{-rate u}` of an exponential-sum kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub weight: DenseMatrix,
    pub rate: f64,
}

pub type KernelClosure = Arc<dyn Fn(f64) -> DenseMatrix + Send + Sync>;

#[derive(Clone)]
pub enum KernelFn {
    ExpSum(Vec<ExpTerm>),
    /// User kernel; `label` enters the model digest.
    Custom {
        label: String,
        rows: usize,
        cols: usize,
        f: KernelClosure,
    },
}

impl fmt::Debug for KernelFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFn::ExpSum(t) => f.debug_tuple("ExpSum").field(t).finish(),
            KernelFn::Custom { label, rows, cols, .. } => {
                write!(f, "Custom({label}, {rows}x{cols})")
            }
        }
    }
}

impl KernelFn {
    pub fn exp_sum(terms: Vec<ExpTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Parameter("exponential kernel needs at least one term".into()))?;
        let (r, c) = (first.weight.rows(), first.weight.cols());
        for t in &terms {
            if t.weight.rows() != r || t.weight.cols() != c {
                return Err(Error::dim(
                    "kernel term weight",
                    format!("{r}x{c}"),
                    format!("{}x{}", t.weight.rows(), t.weight.cols()),
                ));
            }
            if !(t.rate > 0.0 && t.rate.is_finite()) {
                return Err(Error::Parameter(format!(
                    "kernel rate must be positive for square integrability, got {}",
                    t.rate
                )));
            }
        }
        Ok(KernelFn::ExpSum(terms))
    }

    /// Scalar kernel `e^{-rate u}`.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::exp_sum(vec![ExpTerm {
            weight: DenseMatrix::identity(1),
            rate,
        }])
    }

    pub fn custom(
        label: impl Into<String>,
        rows: usize,
        cols: usize,
        f: impl Fn(f64) -> DenseMatrix + Send + Sync + 'static,
    ) -> Self {
        KernelFn::Custom {
            label: label.into(),
            rows,
            cols,
            f: Arc::new(f),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            KernelFn::ExpSum(t) => (t[0].weight.rows(), t[0].weight.cols()),
            KernelFn::Custom { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn eval(&self, u: f64) -> DenseMatrix {
        match self {
            KernelFn::ExpSum(terms) => {
                let (r, c) = self.shape();
                let mut out = DenseMatrix::zeros(r, c);
                for t in terms {
                    let e = (-t.rate * u).exp();
                    for i in 0..r {
                        for j in 0..c {
                            out[(i, j)] += t.weight[(i, j)] * e;
                        }
                    }
                }
                out
            }
            KernelFn::Custom { f, .. } => f(u),
        }
    }

    /// `∫_a^∞ ‖G(s)‖_F^2 ds` in closed form, exponential sums only.
    pub(crate) fn exp_sum_tail(&self, a: f64) -> Option<f64> {
        let KernelFn::ExpSum(terms) = self else {
            return None;
        };
        let mut total = 0.0;
        for ti in terms {
            for tj in terms {
                let w: f64 = ti
                    .weight
                    .as_slice()
                    .iter()
                    .zip(tj.weight.as_slice())
                    .map(|(x, y)| x * y)
                    .sum();
                let r = ti.rate + tj.rate;
                total += w * (-r * a).exp() / r;
            }
        }
        Some(total.max(0.0))
    }

    fn exp_sum_lipschitz(&self) -> Option<f64> {
        let KernelFn::ExpSum(terms) = self else {
            return None;
        };
        Some(terms.iter().map(|t| t.rate * frob(&t.weight)).sum())
    }

    fn canonical(&self) -> String {
        match self {
            KernelFn::ExpSum(terms) => {
                let parts: Vec<String> = terms
                    .iter()
                    .map(|t| format!("{:?}@{:e}", t.weight.as_slice(), t.rate))
                    .collect();
                format!("expsum[{}]", parts.join(","))
            }
            KernelFn::Custom { label, rows, cols, .. } => format!("custom[{label};{rows}x{cols}]"),
        }
    }
}

pub(crate) fn frob(m: &DenseMatrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// LS process `X(t) = ∫_{-∞}^t G(t-s) dL(s)` (two-sided) or
/// `∫_0^t G(t-s) dL(s)` (one-sided).
#[derive(Debug, Clone)]
pub struct LsKernel {
    pub kernel: KernelFn,
    pub driver: DriverSpec,
    /// Declared bound on `∫_0^∞ ‖G(s)‖_F^2 ds`.
    pub kernel_l2_bound: f64,
    /// Truncation horizon with tail mass at most [`KERNEL_TAIL_TOL`].
    pub horizon: f64,
    /// Lipschitz bound on `G` in Frobenius norm.
    pub lipschitz: f64,
    pub two_sided: bool,
}

impl LsKernel {
    /// Exponential-sum kernels: horizon and Lipschitz bound are computed.
    pub fn new(kernel: KernelFn, driver: DriverSpec, two_sided: bool) -> Result<Self> {
        let (_, cols) = kernel.shape();
        if cols != driver.dim() {
            return Err(Error::dim("kernel columns vs driver dimension", driver.dim(), cols));
        }
        let total = kernel.exp_sum_tail(0.0).ok_or_else(|| {
            Error::Parameter("custom kernels need an explicit horizon; use LsKernel::with_horizon".into())
        })?;
        let mut horizon = 1.0;
        while kernel.exp_sum_tail(horizon).unwrap() > KERNEL_TAIL_TOL {
            horizon *= 1.25;
        }
        Ok(Self {
            lipschitz: kernel.exp_sum_lipschitz().unwrap(),
            kernel,
            driver,
            kernel_l2_bound: total,
            horizon,
            two_sided,
        })
    }

    /// General kernels with declared L² bound, horizon and Lipschitz bound.
    /// The tail is checked on `[horizon, 4 horizon]` by quadrature.
    pub fn with_horizon(
        kernel: KernelFn,
        driver: DriverSpec,
        kernel_l2_bound: f64,
        horizon: f64,
        lipschitz: f64,
        two_sided: bool,
    ) -> Result<Self> {
        let (_, cols) = kernel.shape();
        if cols != driver.dim() {
            return Err(Error::dim("kernel columns vs driver dimension", driver.dim(), cols));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("kernel horizon must be positive, got {horizon}")));
        }
        if !(kernel_l2_bound >= 0.0 && kernel_l2_bound.is_finite()) {
            return Err(Error::Parameter(format!(
                "kernel L2 bound must be finite and >= 0, got {kernel_l2_bound}"
            )));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::Parameter(format!("Lipschitz bound must be finite, got {lipschitz}")));
        }
        let sq = |s: f64| {
            let g = kernel.eval(s);
            g.as_slice().iter().map(|v| v * v).sum::<f64>()
        };
        let tail = crate::numerics::quadrature::adaptive_simpson(sq, horizon, 4.0 * horizon, 1e-14)?;
        if tail > KERNEL_TAIL_TOL {
            return Err(Error::Parameter(format!(
                "kernel tail mass {tail:e} beyond horizon {horizon} exceeds {KERNEL_TAIL_TOL:e}"
            )));
        }
        let body = crate::numerics::quadrature::adaptive_simpson(sq, 0.0, horizon, 1e-10)?;
        if body > kernel_l2_bound * (1.0 + 1e-6) + 1e-10 {
            return Err(Error::Parameter(format!(
                "kernel L2 mass {body:e} exceeds declared bound {kernel_l2_bound:e}"
            )));
        }
        Ok(Self {
            kernel,
            driver,
            kernel_l2_bound,
            horizon,
            lipschitz,
            two_sided,
        })
    }

    /// One-sided field over `[0, horizon]` without tail or L² checks, for
    /// kernels that need not decay.
    pub(crate) fn one_sided_window(kernel: KernelFn, driver: DriverSpec, horizon: f64, lipschitz: f64) -> Self {
        Self {
            kernel,
            driver,
            kernel_l2_bound: f64::INFINITY,
            horizon,
            lipschitz,
            two_sided: false,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.kernel.shape().0
    }
}

/// Factor process description.
#[derive(Debug, Clone)]
pub enum FactorModel {
    DriftedBm(DriftedBm),
    MvOu(MvOu),
    Carma(Carma),
    LsKernel(LsKernel),
    /// Independent blocks stacked in order.
    Composite(Vec<FactorModel>),
}

impl FactorModel {
    pub fn drifted_bm(mu: Vec<f64>, sigma: DenseMatrix, x0: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        if sigma.rows() != n {
            return Err(Error::dim("drifted_bm sigma rows", n, sigma.rows()));
        }
        if x0.len() != n {
            return Err(Error::dim("drifted_bm x0", n, x0.len()));
        }
        finite(&mu, "drifted_bm mu")?;
        finite(&x0, "drifted_bm x0")?;
        Ok(FactorModel::DriftedBm(DriftedBm { mu, sigma, x0 }))
    }

    pub fn mv_ou(
        mu: Vec<f64>,
        c: DenseMatrix,
        sigma: DenseMatrix,
        driver: DriverSpec,
        start: Start,
    ) -> Result<Self> {
        let n = c.require_square("mv_ou mean-reversion matrix")?;
        if mu.len() != n {
            return Err(Error::dim("mv_ou mu", n, mu.len()));
        }
        if sigma.rows() != n {
            return Err(Error::dim("mv_ou sigma rows", n, sigma.rows()));
        }
        if sigma.cols() != driver.dim() {
            return Err(Error::dim("mv_ou sigma columns vs driver", driver.dim(), sigma.cols()));
        }
        finite(&mu, "mv_ou mu")?;
        match &start {
            Start::At(x0) => {
                if x0.len() != n {
                    return Err(Error::dim("mv_ou x0", n, x0.len()));
                }
                finite(x0, "mv_ou x0")?;
            }
            Start::Stationary => {
                let s = eig_real_parts(&c)?;
                if s.max_real_part >= 0.0 {
                    return Err(Error::Stability {
                        max_real_part: s.max_real_part,
                    });
                }
            }
        }
        Ok(FactorModel::MvOu(MvOu {
            mu,
            c,
            sigma,
            driver,
            start,
            trend: None,
        }))
    }

    /// Adds a deterministic linear trend `trend * t` to an mv_ou model.
    pub fn with_trend(self, trend: Vec<f64>) -> Result<Self> {
        match self {
            FactorModel::MvOu(mut m) => {
                if trend.len() != m.mu.len() {
                    return Err(Error::dim("mv_ou trend", m.mu.len(), trend.len()));
                }
                finite(&trend, "mv_ou trend")?;
                m.trend = Some(trend);
                Ok(FactorModel::MvOu(m))
            }
            _ => Err(Error::Unsupported("trend only applies to mv_ou models".into())),
        }
    }

    pub fn carma(
        p: usize,
        q: usize,
        alpha: Vec<f64>,
        b: Vec<f64>,
        driver: DriverSpec,
        start: Start,
    ) -> Result<Self> {
        let (a, b_vec, _) = build_carma_state_space(p, q, &alpha, &b)?;
        if driver.dim() != 1 {
            return Err(Error::dim("carma driver", 1, driver.dim()));
        }
        match &start {
            Start::At(y0) => {
                if y0.len() != p {
                    return Err(Error::dim("carma initial state", p, y0.len()));
                }
                finite(y0, "carma initial state")?;
            }
            Start::Stationary => {
                let s = eig_real_parts(&a)?;
                if s.max_real_part >= 0.0 {
                    return Err(Error::Stability {
                        max_real_part: s.max_real_part,
                    });
                }
            }
        }
        Ok(FactorModel::Carma(Carma {
            p,
            q,
            alpha,
            b: b_vec,
            driver,
            start,
        }))
    }

    pub fn ls_kernel(model: LsKernel) -> Self {
        FactorModel::LsKernel(model)
    }

    pub fn composite(blocks: Vec<FactorModel>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Parameter("composite model needs at least one block".into()));
        }
        Ok(FactorModel::Composite(blocks))
    }

    /// Dimension of the observed process `X`.
    pub fn dim(&self) -> usize {
        match self {
            FactorModel::DriftedBm(m) => m.mu.len(),
            FactorModel::MvOu(m) => m.mu.len(),
            FactorModel::Carma(_) => 1,
            FactorModel::LsKernel(m) => m.out_dim(),
            FactorModel::Composite(b) => b.iter().map(|m| m.dim()).sum(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            FactorModel::DriftedBm(_) => "drifted_bm",
            FactorModel::MvOu(_) => "mv_ou",
            FactorModel::Carma(_) => "carma",
            FactorModel::LsKernel(_) => "ls_kernel",
            FactorModel::Composite(_) => "composite",
        }
    }

    /// Stable textual form used for digests.
    pub fn canonical(&self) -> String {
        match self {
            FactorModel::DriftedBm(m) => format!(
                "drifted_bm[mu={:?};sigma={}x{}:{:?};x0={:?}]",
                m.mu,
                m.sigma.rows(),
                m.sigma.cols(),
                m.sigma.as_slice(),
                m.x0
            ),
            FactorModel::MvOu(m) => format!(
                "mv_ou[mu={:?};c={:?};sigma={}x{}:{:?};{};start={:?};trend={:?}]",
                m.mu,
                m.c.as_slice(),
                m.sigma.rows(),
                m.sigma.cols(),
                m.sigma.as_slice(),
                m.driver.canonical(),
                m.start,
                m.trend
            ),
            FactorModel::Carma(m) => format!(
                "carma[p={};q={};alpha={:?};b={:?};{};start={:?}]",
                m.p,
                m.q,
                m.alpha,
                m.b,
                m.driver.canonical(),
                m.start
            ),
            FactorModel::LsKernel(m) => format!(
                "ls_kernel[{};{};l2={:e};horizon={:e};lip={:e};two_sided={}]",
                m.kernel.canonical(),
                m.driver.canonical(),
                m.kernel_l2_bound,
                m.horizon,
                m.lipschitz,
                m.two_sided
            ),
            FactorModel::Composite(b) => {
                let parts: Vec<String> = b.iter().map(|m| m.canonical()).collect();
                format!("composite[{}]", parts.join("|"))
            }
        }
    }

    /// Hex SHA-256 of [`FactorModel::canonical`].
    pub fn digest(&self) -> String {
        let h = Sha256::digest(self.canonical().as_bytes());
        h.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Slowest decay time `1 / min |Re λ|` over stable linear blocks, used
    /// to pick default analysis times. LS blocks contribute their horizon.
    pub fn relaxation_time(&self) -> Option<f64> {
        match self {
            FactorModel::DriftedBm(_) => None,
            FactorModel::MvOu(m) => stable_relaxation(&m.c),
            FactorModel::Carma(m) => {
                let (a, _, _) = build_carma_state_space(m.p, m.q, &m.alpha, &m.b).ok()?;
                stable_relaxation(&a)
            }
            FactorModel::LsKernel(m) => Some(m.horizon / 8.0),
            FactorModel::Composite(b) => b
                .iter()
                .filter_map(|m| m.relaxation_time())
                .reduce(f64::max),
        }
    }
}

/// `1 / min |Re λ|` over the eigenvalues with negative real part.
fn stable_relaxation(c: &DenseMatrix) -> Option<f64> {
    let s = eig_real_parts(c).ok()?;
    s.real_parts
        .iter()
        .filter(|r| **r < -1e-12)
        .map(|r| 1.0 / r.abs())
        .reduce(f64::max)
}

/// Horizon `T` with `‖e^{CT}‖_1 <= tol` for stable `C`.
pub(crate) fn decay_horizon(c: &DenseMatrix, tol: f64) -> Result<f64> {
    let s = eig_real_parts(c)?;
    if s.max_real_part >= 0.0 {
        return Err(Error::Stability {
            max_real_part: s.max_real_part,
        });
    }
    let mut t = 1.0 / s.max_real_part.abs();
    for _ in 0..200 {
        if mat_exp(c, t)?.norm_one() <= tol {
            return Ok(t);
        }
        t *= 1.5;
    }
    Err(Error::Numeric {
        context: "decay horizon search".into(),
        residual: mat_exp(c, t)?.norm_one(),
    })
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{what} has non-finite entries")));
    }
    Ok(())
}
