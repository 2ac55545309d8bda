// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;

use super::carma::build_carma_state_space;
use super::driver::DriverSpec;
use super::model::{decay_horizon, FactorModel, LsKernel, Start};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{adaptive_simpson_vec, DEFAULT_ABS_TOL};
use crate::numerics::{
    dot, eig_real_parts, integrate_mat_exp, lyapunov_stationary_cov, mat_exp, solve,
    transition_covariance, DenseMatrix,
};

/// `‖e^{CT}‖` level at which a stable linear block counts as forgotten.
pub(crate) const DECAY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryStatus {
    Stationary,
    NonStationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    pub mean: Vec<f64>,
    pub cov: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryVerdict {
    pub status: StationaryStatus,
    pub law: Option<GaussianLaw>,
    pub reason: String,
}

impl StationaryVerdict {
    pub fn is_stationary(&self) -> bool {
        self.status == StationaryStatus::Stationary
    }

    fn non(reason: &str) -> Self {
        Self {
            status: StationaryStatus::NonStationary,
            law: None,
            reason: reason.into(),
        }
    }
}

/// Linear SDE form `dY = (mu + C Y) dt + Σ dL`, `X = H Y + trend t`
/// shared by drifted BM, mv_ou and CARMA.
#[derive(Debug, Clone)]
pub(crate) struct LinearSde {
    pub c: DenseMatrix,
    pub mu: Vec<f64>,
    pub sigma: DenseMatrix,
    pub driver: DriverSpec,
    pub start: Start,
    pub h: DenseMatrix,
    pub trend: Option<Vec<f64>>,
}

impl LinearSde {
    pub fn of(model: &FactorModel) -> Option<LinearSde> {
        match model {
            FactorModel::DriftedBm(m) => {
                let n = m.mu.len();
                Some(LinearSde {
                    c: DenseMatrix::zeros(n, n),
                    mu: m.mu.clone(),
                    sigma: m.sigma.clone(),
                    driver: DriverSpec::standard(m.sigma.cols()),
                    start: Start::At(m.x0.clone()),
                    h: DenseMatrix::identity(n),
                    trend: None,
                })
            }
            FactorModel::MvOu(m) => Some(LinearSde {
                c: m.c.clone(),
                mu: m.mu.clone(),
                sigma: m.sigma.clone(),
                driver: m.driver.clone(),
                start: m.start.clone(),
                h: DenseMatrix::identity(m.mu.len()),
                trend: m.trend.clone(),
            }),
            FactorModel::Carma(m) => {
                let (a, b, e_p) = build_carma_state_space(m.p, m.q, &m.alpha, &m.b).ok()?;
                Some(LinearSde {
                    c: a,
                    mu: vec![0.0; m.p],
                    sigma: DenseMatrix::column(&e_p).ok()?,
                    driver: m.driver.clone(),
                    start: m.start.clone(),
                    h: DenseMatrix::new(1, m.p, b).ok()?,
                    trend: None,
                })
            }
            _ => None,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.mu.len()
    }

    /// `Σ Cov(L(1)) Σ^T`.
    pub fn noise_cov(&self) -> DenseMatrix {
        self.sigma
            .mul_unchecked(&self.driver.covariance())
            .mul_unchecked(&self.sigma.transpose())
    }

    /// Brownian part only: `Σ Σ_B Σ^T`.
    pub fn diffusion_cov(&self) -> DenseMatrix {
        self.sigma
            .mul_unchecked(self.driver.diffusion_cov())
            .mul_unchecked(&self.sigma.transpose())
    }

    pub fn stationary_mean(&self) -> Result<Vec<f64>> {
        let neg: Vec<f64> = self.mu.iter().map(|v| -v).collect();
        solve(&self.c, &neg)
    }

    /// Mean of `Y(t)` for a deterministic start.
    pub fn mean_at(&self, y0: &[f64], t: f64) -> Result<Vec<f64>> {
        let e = mat_exp(&self.c, t)?;
        let drift = integrate_mat_exp(&self.c, &self.mu, t)?;
        Ok(e
            .matvec_unchecked(y0)
            .iter()
            .zip(&drift)
            .map(|(a, b)| a + b)
            .collect())
    }

    fn trend_term(&self, z: &[f64], t: f64) -> f64 {
        self.trend.as_ref().map(|tr| dot(z, tr) * t).unwrap_or(0.0)
    }

    /// `log E exp(i z^T X(t))`.
    pub fn cumulant(&self, t: f64, z: &[f64]) -> Result<Complex64> {
        let w = self.h.tmatvec(z)?;
        let (mean, upper) = match &self.start {
            Start::At(y0) => (self.mean_at(y0, t)?, Some(t)),
            Start::Stationary => (self.stationary_mean()?, None),
        };
        let mut re = 0.0;
        let im = dot(&w, &mean) + self.trend_term(z, t);
        if self.driver.is_gaussian() {
            let cov = match upper {
                Some(t) => transition_covariance(&self.c, &self.noise_cov(), t)?,
                None => lyapunov_stationary_cov(&self.c, &self.noise_cov())?,
            };
            re -= 0.5 * cov.quad_form(&w);
            return Ok(Complex64::new(re, im));
        }
        let upper = match upper {
            Some(t) => t,
            None => decay_horizon(&self.c, DECAY_TOL)?,
        };
        let ct = self.c.transpose();
        let st = self.sigma.transpose();
        let v = psi_integral(
            |s| {
                let e = mat_exp(&ct, s).expect("finite exponent");
                st.matvec_unchecked(&e.matvec_unchecked(&w))
            },
            &self.driver,
            upper,
        )?;
        Ok(v + Complex64::new(0.0, im))
    }
}

/// `∫_0^T ψ(u(s)) ds` by vector adaptive Simpson on real and imaginary parts.
pub(crate) fn psi_integral<U: Fn(f64) -> Vec<f64>>(
    u: U,
    driver: &DriverSpec,
    upper: f64,
) -> Result<Complex64> {
    let v = adaptive_simpson_vec(
        |s| {
            let p = driver.psi(&u(s));
            vec![p.re, p.im]
        },
        2,
        0.0,
        upper,
        DEFAULT_ABS_TOL,
    )?;
    Ok(Complex64::new(v[0], v[1]))
}

/// Stationarity and, for Gaussian drivers, the limiting law.
pub fn classify_stationary(model: &FactorModel) -> StationaryVerdict {
    match model {
        FactorModel::DriftedBm(m) => {
            let drift = m.mu.iter().any(|v| *v != 0.0);
            let noise = m.sigma.max_abs() > 0.0;
            if drift {
                StationaryVerdict::non("drift_present")
            } else if noise {
                StationaryVerdict::non("brownian_component")
            } else {
                StationaryVerdict {
                    status: StationaryStatus::Stationary,
                    law: Some(GaussianLaw {
                        mean: m.x0.clone(),
                        cov: DenseMatrix::zeros(m.x0.len(), m.x0.len()),
                    }),
                    reason: "degenerate_constant".into(),
                }
            }
        }
        FactorModel::MvOu(_) | FactorModel::Carma(_) => {
            let sde = LinearSde::of(model).expect("linear model");
            if sde.trend.as_ref().is_some_and(|t| t.iter().any(|v| *v != 0.0)) {
                return StationaryVerdict::non("drift_present");
            }
            let spec = match eig_real_parts(&sde.c) {
                Ok(s) => s,
                Err(_) => return StationaryVerdict::non("eigen_solve_failed"),
            };
            if spec.max_real_part >= 0.0 {
                return StationaryVerdict::non("eigenvalue_nonnegative");
            }
            let law = if sde.driver.is_gaussian() {
                gaussian_stationary_law(&sde).ok()
            } else {
                None
            };
            StationaryVerdict {
                status: StationaryStatus::Stationary,
                law,
                reason: "eigenvalues_negative".into(),
            }
        }
        FactorModel::LsKernel(m) => {
            if !m.kernel_l2_bound.is_finite() {
                return StationaryVerdict::non("kernel_not_square_integrable");
            }
            let law = if m.driver.is_gaussian() {
                ls_stationary_cov(m).ok().map(|cov| GaussianLaw {
                    mean: vec![0.0; m.out_dim()],
                    cov,
                })
            } else {
                None
            };
            StationaryVerdict {
                status: StationaryStatus::Stationary,
                law,
                reason: "kernel_square_integrable".into(),
            }
        }
        FactorModel::Composite(blocks) => {
            let verdicts: Vec<StationaryVerdict> = blocks.iter().map(classify_stationary).collect();
            if let Some(v) = verdicts.iter().find(|v| !v.is_stationary()) {
                return StationaryVerdict::non(&v.reason);
            }
            let law = if verdicts.iter().all(|v| v.law.is_some()) {
                let laws: Vec<&GaussianLaw> = verdicts.iter().map(|v| v.law.as_ref().unwrap()).collect();
                let mean = laws.iter().flat_map(|l| l.mean.iter().copied()).collect();
                let covs: Vec<&DenseMatrix> = laws.iter().map(|l| &l.cov).collect();
                Some(GaussianLaw {
                    mean,
                    cov: DenseMatrix::block_diag(&covs),
                })
            } else {
                None
            };
            StationaryVerdict {
                status: StationaryStatus::Stationary,
                law,
                reason: "all_blocks_stationary".into(),
            }
        }
    }
}

fn gaussian_stationary_law(sde: &LinearSde) -> Result<GaussianLaw> {
    let v = lyapunov_stationary_cov(&sde.c, &sde.noise_cov())?;
    let mean_y = sde.stationary_mean()?;
    let cov = sde.h.mul_unchecked(&v).mul_unchecked(&sde.h.transpose()).symmetrize();
    Ok(GaussianLaw {
        mean: sde.h.matvec_unchecked(&mean_y),
        cov,
    })
}

/// `∫_0^T G(s) Cov(L(1)) G(s)^T ds` over the truncation horizon.
pub(crate) fn ls_stationary_cov(m: &LsKernel) -> Result<DenseMatrix> {
    ls_cov_between(m, 0.0, 0.0, m.horizon)
}

/// `∫_0^T G(s + x) Q G(s + y)^T ds`.
pub(crate) fn ls_cov_between(m: &LsKernel, x: f64, y: f64, upper: f64) -> Result<DenseMatrix> {
    let q = m.driver.covariance();
    let r = m.out_dim();
    let v = adaptive_simpson_vec(
        |s| {
            let gx = m.kernel.eval(s + x);
            let gy = m.kernel.eval(s + y);
            gx.mul_unchecked(&q).mul_unchecked(&gy.transpose()).into_vec()
        },
        r * r,
        0.0,
        upper,
        DEFAULT_ABS_TOL,
    )?;
    DenseMatrix::new(r, r, v)
}

/// Log-characteristic function `log E exp(i z^T X(t))`.
pub fn cumulant(model: &FactorModel, t: f64, z: &[f64]) -> Result<Complex64> {
    if z.len() != model.dim() {
        return Err(Error::dim("cumulant argument", model.dim(), z.len()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("cumulant time {t} must be finite and >= 0")));
    }
    match model {
        FactorModel::DriftedBm(_) | FactorModel::MvOu(_) | FactorModel::Carma(_) => {
            LinearSde::of(model).expect("linear model").cumulant(t, z)
        }
        FactorModel::LsKernel(m) => ls_cumulant(m, 0.0, t, z),
        FactorModel::Composite(blocks) => {
            let mut off = 0;
            let mut total = Complex64::new(0.0, 0.0);
            for b in blocks {
                let d = b.dim();
                total += cumulant(b, t, &z[off..off + d])?;
                off += d;
            }
            Ok(total)
        }
    }
}

/// Cumulant of the shifted field `∫ G(t - s + x) dL(s)`.
pub(crate) fn ls_cumulant(m: &LsKernel, x: f64, t: f64, z: &[f64]) -> Result<Complex64> {
    let upper = if m.two_sided { m.horizon } else { t.min(m.horizon) };
    psi_integral(|s| m.kernel.eval(s + x).tmatvec(z).expect("shape"), &m.driver, upper)
}
