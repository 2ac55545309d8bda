// SPDX-License-Identifier: Apache-2.0

//! Exact transition sampling for linear SDEs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::Result;
use crate::factor_models::{decay_horizon, LinearSde, Start, DECAY_TOL};
use crate::numerics::{
    integrate_mat_exp, lyapunov_stationary_cov, mat_exp, psd_sqrt, transition_covariance,
    DenseMatrix,
};

/// Precomputed one-step transition over a fixed `Δ`.
#[derive(Debug, Clone)]
struct Step {
    dt: f64,
    phi: DenseMatrix,
    /// `∫ e^{Cs} mu ds` minus the jump compensator.
    drift: Vec<f64>,
    chol: DenseMatrix,
}

#[derive(Debug, Clone)]
struct JumpSampler {
    rate: f64,
    mean: Vec<f64>,
    chol: DenseMatrix,
}

#[derive(Debug, Clone)]
enum Init {
    Fixed(Vec<f64>),
    Gaussian { mean: Vec<f64>, chol: DenseMatrix },
    /// Start at the stationary mean and run one exact step of this length.
    BurnIn { mean: Vec<f64>, step: Step },
}

#[derive(Debug, Clone)]
pub(crate) struct LinearSim {
    sde: LinearSde,
    init: Init,
    /// Step used to move from 0 to the first grid point (deterministic start).
    lead: Option<Step>,
    /// Step per grid interval.
    steps: Vec<Step>,
    times: Vec<f64>,
    jumps: Option<JumpSampler>,
}

impl LinearSim {
    pub fn new(sde: LinearSde, times: &[f64]) -> Result<Self> {
        let jumps = match sde.driver.jumps() {
            Some(j) => Some(JumpSampler {
                rate: j.rate,
                mean: j.mean.clone(),
                chol: psd_sqrt(&j.cov)?,
            }),
            None => None,
        };
        let mut cache: Vec<Step> = Vec::new();
        let mut get = |dt: f64, sde: &LinearSde| -> Result<Step> {
            if let Some(s) = cache.iter().find(|s| s.dt.to_bits() == dt.to_bits()) {
                return Ok(s.clone());
            }
            let s = make_step(sde, dt)?;
            cache.push(s.clone());
            Ok(s)
        };
        let init = match &sde.start {
            Start::At(y0) => Init::Fixed(y0.clone()),
            Start::Stationary => {
                let mean = sde.stationary_mean()?;
                if sde.driver.is_gaussian() {
                    let v = lyapunov_stationary_cov(&sde.c, &sde.noise_cov())?;
                    Init::Gaussian {
                        mean,
                        chol: psd_sqrt(&v)?,
                    }
                } else {
                    let horizon = decay_horizon(&sde.c, DECAY_TOL)?;
                    Init::BurnIn {
                        mean,
                        step: make_step(&sde, horizon)?,
                    }
                }
            }
        };
        let lead = match (&sde.start, times[0] > 0.0) {
            (Start::At(_), true) => Some(get(times[0], &sde)?),
            _ => None,
        };
        let mut steps = Vec::with_capacity(times.len().saturating_sub(1));
        for w in times.windows(2) {
            steps.push(get(w[1] - w[0], &sde)?);
        }
        Ok(Self {
            sde,
            init,
            lead,
            steps,
            times: times.to_vec(),
            jumps,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.sde.h.rows()
    }

    /// Writes `|times| x out_dim` values at `out[i * stride + offset ..]`.
    pub fn run_path(&self, rng: &mut ChaCha8Rng, out: &mut [f64], stride: usize, offset: usize) {
        let n = self.sde.state_dim();
        let mut y = match &self.init {
            Init::Fixed(y0) => y0.clone(),
            Init::Gaussian { mean, chol } => {
                let xi = normals(rng, n);
                let mut y = chol.matvec_unchecked(&xi);
                for (a, b) in y.iter_mut().zip(mean) {
                    *a += b;
                }
                y
            }
            Init::BurnIn { mean, step } => self.advance(mean, step, rng),
        };
        if let Some(step) = &self.lead {
            y = self.advance(&y, step, rng);
        }
        self.emit(&y, 0, out, stride, offset);
        for (i, step) in self.steps.iter().enumerate() {
            y = self.advance(&y, step, rng);
            self.emit(&y, i + 1, out, stride, offset);
        }
    }

    fn emit(&self, y: &[f64], i: usize, out: &mut [f64], stride: usize, offset: usize) {
        let t = self.times[i];
        let x = self.sde.h.matvec_unchecked(y);
        let dst = &mut out[i * stride + offset..i * stride + offset + x.len()];
        for (k, (d, v)) in dst.iter_mut().zip(&x).enumerate() {
            *d = v + self.sde.trend.as_ref().map(|tr| tr[k] * t).unwrap_or(0.0);
        }
    }

    fn advance(&self, y: &[f64], step: &Step, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = y.len();
        let mut next = step.phi.matvec_unchecked(y);
        for (a, b) in next.iter_mut().zip(&step.drift) {
            *a += b;
        }
        let xi = normals(rng, n);
        for (a, b) in next.iter_mut().zip(step.chol.matvec_unchecked(&xi)) {
            *a += b;
        }
        if let Some(j) = &self.jumps {
            let lam = j.rate * step.dt;
            let count = Poisson::new(lam).map(|p| p.sample(rng) as usize).unwrap_or(0);
            for _ in 0..count {
                let u: f64 = rng.random::<f64>() * step.dt;
                let xi = normals(rng, j.mean.len());
                let mut size = j.chol.matvec_unchecked(&xi);
                for (a, b) in size.iter_mut().zip(&j.mean) {
                    *a += b;
                }
                let kick = self.sde.sigma.matvec_unchecked(&size);
                let prop = mat_exp(&self.sde.c, step.dt - u).expect("finite exponent");
                for (a, b) in next.iter_mut().zip(prop.matvec_unchecked(&kick)) {
                    *a += b;
                }
            }
        }
        next
    }
}

fn make_step(sde: &LinearSde, dt: f64) -> Result<Step> {
    let phi = mat_exp(&sde.c, dt)?;
    let mut drift = integrate_mat_exp(&sde.c, &sde.mu, dt)?;
    if let Some(j) = sde.driver.jumps() {
        let sm = sde.sigma.matvec_unchecked(&j.mean);
        let comp = integrate_mat_exp(&sde.c, &sm, dt)?;
        for (a, b) in drift.iter_mut().zip(comp) {
            *a -= j.rate * b;
        }
    }
    let cov = transition_covariance(&sde.c, &sde.diffusion_cov(), dt)?;
    Ok(Step {
        dt,
        phi,
        drift,
        chol: psd_sqrt(&cov)?,
    })
}

pub(crate) fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}
