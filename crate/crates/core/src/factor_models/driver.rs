// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{check_symmetric_psd, dot, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverKind {
    Brownian,
    CompoundPoissonNormal,
}

/// Gaussian jump part of a compound Poisson driver.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSpec {
    pub rate: f64,
    pub mean: Vec<f64>,
    pub cov: DenseMatrix,
}

/// Zero-mean Lévy driver: Brownian part with covariance `cov` per unit
/// time, plus optional compound Poisson jumps compensated by `-rate * mean`
/// drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    cov: DenseMatrix,
    jumps: Option<JumpSpec>,
}

impl DriverSpec {
    pub fn brownian(cov: DenseMatrix) -> Result<Self> {
        check_symmetric_psd(&cov, "driver covariance")?;
        Ok(Self { cov, jumps: None })
    }

    /// Standard `k`-dimensional Brownian motion.
    pub fn standard(k: usize) -> Self {
        Self {
            cov: DenseMatrix::identity(k),
            jumps: None,
        }
    }

    /// Compound Poisson with N(mean, jump_cov) jumps on top of a Brownian
    /// part with covariance `diffusion` (pass a zero matrix for pure jumps).
    pub fn compound_poisson(diffusion: DenseMatrix, jumps: JumpSpec) -> Result<Self> {
        check_symmetric_psd(&diffusion, "driver covariance")?;
        let k = diffusion.rows();
        if !(jumps.rate > 0.0 && jumps.rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "jump rate must be positive and finite, got {}",
                jumps.rate
            )));
        }
        if jumps.mean.len() != k {
            return Err(Error::dim("jump mean", k, jumps.mean.len()));
        }
        if jumps.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("jump mean has non-finite entries".into()));
        }
        if jumps.cov.rows() != k || jumps.cov.cols() != k {
            return Err(Error::dim(
                "jump covariance",
                format!("{k}x{k}"),
                format!("{}x{}", jumps.cov.rows(), jumps.cov.cols()),
            ));
        }
        check_symmetric_psd(&jumps.cov, "jump covariance")?;
        Ok(Self {
            cov: diffusion,
            jumps: Some(jumps),
        })
    }

    pub fn dim(&self) -> usize {
        self.cov.rows()
    }

    pub fn kind(&self) -> DriverKind {
        if self.jumps.is_some() {
            DriverKind::CompoundPoissonNormal
        } else {
            DriverKind::Brownian
        }
    }

    pub fn is_gaussian(&self) -> bool {
        self.jumps.is_none()
    }

    pub fn diffusion_cov(&self) -> &DenseMatrix {
        &self.cov
    }

    pub fn jumps(&self) -> Option<&JumpSpec> {
        self.jumps.as_ref()
    }

    /// Covariance of `L(1)`: `Σ_B + λ (J + m m^T)`.
    pub fn covariance(&self) -> DenseMatrix {
        match &self.jumps {
            None => self.cov.clone(),
            Some(j) => {
                let second = j.cov.add(&DenseMatrix::outer(&j.mean, &j.mean)).expect("same shape");
                self.cov.add(&second.scale(j.rate)).expect("same shape")
            }
        }
    }

    /// Characteristic exponent `ψ(u) = log E exp(i u^T L(1))`.
    pub fn psi(&self, u: &[f64]) -> Complex64 {
        let mut out = Complex64::new(-0.5 * self.cov.quad_form(u), 0.0);
        if let Some(j) = &self.jumps {
            let um = dot(u, &j.mean);
            let phi = Complex64::new(-0.5 * j.cov.quad_form(u), um).exp();
            out += j.rate * (phi - 1.0 - Complex64::new(0.0, um));
        }
        out
    }

    /// Exponential cumulant `κ(u) = log E exp(u^T L(1))` at real `u`.
    /// Always finite for Gaussian and Gaussian-jump drivers.
    pub fn kappa(&self, u: &[f64]) -> Result<f64> {
        let mut out = 0.5 * self.cov.quad_form(u);
        if let Some(j) = &self.jumps {
            let um = dot(u, &j.mean);
            let expo = um + 0.5 * j.cov.quad_form(u);
            if expo > 700.0 {
                return Err(Error::Domain(format!(
                    "exponential moment overflows at exponent {expo:e}"
                )));
            }
            out += j.rate * (expo.exp() - 1.0 - um);
        }
        Ok(out)
    }

    pub(crate) fn canonical(&self) -> String {
        let mut s = format!("driver[cov={:?}", self.cov.as_slice());
        if let Some(j) = &self.jumps {
            s.push_str(&format!(
                ";rate={:e};jmean={:?};jcov={:?}",
                j.rate,
                j.mean,
                j.cov.as_slice()
            ));
        }
        s.push(']');
        s
    }
}
