// SPDX-License-Identifier: Apache-2.0

//! Cointegration decisions for a factor model under a pricing system.
//!
//! The analytic route checks that `P^T c` only loads the declared
//! stationary block and that this block is stationary. Everything else is
//! screened for deterministic drift and then sent to a two-time
//! characteristic-function comparison on simulated paths.


use std::io::Write;

use crate::error::{Error, Result};
use crate::factor_models::{
    classify_stationary, ls_stationary_cov, DriftedBm, FactorModel, LinearSde, MvOu, Start,
};
use crate::numerics::{dot, lyapunov_stationary_cov, norm2, DenseMatrix};
use crate::pricing_system::{is_coint_pair, PricingSystem};
use crate::simulation::{fmt_num, simulate, TimeGrid};

pub use cf_test::{
    cf_two_sample_test, default_z_grid, empirical_cf, TwoSampleCf, BOOT_LEVEL, DEFAULT_N_BOOT,
    MIN_PATHS,
};

/// Band above `D*` within which a declared direction is reported as
/// inconclusive instead of not cointegrated.
pub const INCONCLUSIVE_BAND: f64 = 1.2;
const DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CointegratedAnalytic,
    CointegratedEmpirical,
    NotCointegrated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CointegratedAnalytic => "cointegrated_analytic",
            Verdict::CointegratedEmpirical => "cointegrated_empirical",
            Verdict::NotCointegrated => "not_cointegrated",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn is_cointegrated(&self) -> bool {
        matches!(self, Verdict::CointegratedAnalytic | Verdict::CointegratedEmpirical)
    }
}

/// Empirical CF comparison of `a^T X` at two times.
#[derive(Debug, Clone, PartialEq)]
pub struct CfStatistic {
    pub t1: f64,
    pub t2: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub z_grid: Vec<f64>,
    pub test: TwoSampleCf,
}

impl CfStatistic {
    pub fn d(&self) -> f64 {
        self.test.d
    }

    pub fn d_star(&self) -> f64 {
        self.test.d_star
    }

    pub fn is_stationary(&self) -> bool {
        self.test.passes()
    }

    /// `t,z,re,im` rows for both time points.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,z,re,im")?;
        for (t, cf) in [(self.t1, &self.test.cf1), (self.t2, &self.test.cf2)] {
            for (z, v) in self.z_grid.iter().zip(cf.iter()) {
                writeln!(w, "{},{},{},{}", fmt_num(t), fmt_num(*z), fmt_num(v.re), fmt_num(v.im))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CointDetails {
    /// `P^T c`.
    pub loading: Vec<f64>,
    pub coint_pair: bool,
    pub coint_pair_residual: Vec<f64>,
    /// Stationarity reason for the leading `m` block, `None` when that block
    /// cannot be separated from the rest of the model.
    pub block_reason: Option<String>,
    pub block_stationary: bool,
    pub drift_loading: f64,
    pub in_declared_span: bool,
    pub cf: Option<CfStatistic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CointReport {
    pub verdict: Verdict,
    pub details: CointDetails,
    pub z_grid: Vec<f64>,
}

impl CointReport {
    /// `key: value` pairs in a fixed order.
    pub fn lines(&self) -> Vec<(String, String)> {
        let d = &self.details;
        let list = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ");
        let mut out = vec![
            ("verdict".to_string(), self.verdict.as_str().to_string()),
            ("loading".into(), list(&d.loading)),
            ("coint_pair".into(), d.coint_pair.to_string()),
            ("coint_pair_residual".into(), list(&d.coint_pair_residual)),
            ("block_stationary".into(), d.block_stationary.to_string()),
            (
                "block_reason".into(),
                d.block_reason.clone().unwrap_or_else(|| "not_separable".into()),
            ),
            ("drift_loading".into(), fmt_num(d.drift_loading)),
            ("in_declared_span".into(), d.in_declared_span.to_string()),
            ("z_grid".into(), list(&self.z_grid)),
        ];
        if let Some(cf) = &d.cf {
            out.extend([
                ("cf_t1".to_string(), fmt_num(cf.t1)),
                ("cf_t2".into(), fmt_num(cf.t2)),
                ("cf_n_paths".into(), cf.n_paths.to_string()),
                ("cf_seed".into(), cf.seed.to_string()),
                ("cf_n_boot".into(), cf.test.n_boot.to_string()),
                ("cf_d".into(), fmt_num(cf.d())),
                ("cf_d_star".into(), fmt_num(cf.d_star())),
                ("cf_stationary".into(), cf.is_stationary().to_string()),
                (
                    "cf_note".into(),
                    "two-time CF agreement on a compact z grid; a limit law must be continuous at z=0".into(),
                ),
            ]);
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in self.lines() {
            writeln!(w, "{k}: {v}")?;
        }
        Ok(())
    }
}

/// Settings for the empirical fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalOptions {
    /// Defaults to 8 and 16 relaxation times.
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub z_grid: Vec<f64>,
    pub n_paths: usize,
    pub n_boot: usize,
    pub seed: u64,
}

impl EmpiricalOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            t1: None,
            t2: None,
            z_grid: default_z_grid(),
            n_paths: 10_000,
            n_boot: DEFAULT_N_BOOT,
            seed,
        }
    }

    /// Resolved `(t1, t2)`.
    pub fn times(&self, model: &FactorModel) -> (f64, f64) {
        let tau = model.relaxation_time().unwrap_or(1.0);
        let t1 = self.t1.unwrap_or((8.0 * tau).max(burn_in(model)));
        let t2 = self.t2.unwrap_or(2.0 * t1);
        (t1, t2)
    }
}

/// Earliest time at which one-sided LS blocks have a full kernel window.
fn burn_in(model: &FactorModel) -> f64 {
    match model {
        FactorModel::LsKernel(m) if !m.two_sided => m.horizon,
        FactorModel::Composite(b) => b.iter().map(burn_in).fold(0.0, f64::max),
        _ => 0.0,
    }
}

/// Leading `m` coordinates as a model of their own, when they do not
/// depend on the remaining coordinates.
pub fn leading_block(model: &FactorModel, m: usize) -> Option<FactorModel> {
    let n = model.dim();
    if m == n {
        return Some(model.clone());
    }
    if m == 0 || m > n {
        return None;
    }
    match model {
        FactorModel::DriftedBm(b) => {
            let sigma = b.sigma.submatrix(0, m, 0, b.sigma.cols());
            Some(FactorModel::DriftedBm(DriftedBm {
                mu: b.mu[..m].to_vec(),
                sigma,
                x0: b.x0[..m].to_vec(),
            }))
        }
        FactorModel::MvOu(o) => {
            let coupling = o.c.submatrix(0, m, m, n);
            if coupling.max_abs() != 0.0 {
                return None;
            }
            let start = match &o.start {
                Start::At(x0) => Start::At(x0[..m].to_vec()),
                Start::Stationary => Start::Stationary,
            };
            Some(FactorModel::MvOu(MvOu {
                mu: o.mu[..m].to_vec(),
                c: o.c.submatrix(0, m, 0, m),
                sigma: o.sigma.submatrix(0, m, 0, o.sigma.cols()),
                driver: o.driver.clone(),
                start,
                trend: o.trend.as_ref().map(|t| t[..m].to_vec()),
            }))
        }
        FactorModel::Composite(blocks) => {
            let mut out = Vec::new();
            let mut left = m;
            for b in blocks {
                if left == 0 {
                    break;
                }
                let d = b.dim();
                if d <= left {
                    out.push(b.clone());
                    left -= d;
                } else {
                    out.push(leading_block(b, left)?);
                    left = 0;
                }
            }
            if out.len() == 1 {
                out.pop()
            } else {
                Some(FactorModel::Composite(out))
            }
        }
        FactorModel::Carma(_) | FactorModel::LsKernel(_) => None,
    }
}

/// Per-coordinate linear growth rate of `E X(t)`.
pub fn drift_vector(model: &FactorModel) -> Vec<f64> {
    match model {
        FactorModel::DriftedBm(b) => b.mu.clone(),
        FactorModel::MvOu(o) => {
            let n = o.mu.len();
            (0..n)
                .map(|i| {
                    let free = (0..n).all(|j| o.c[(i, j)] == 0.0);
                    let t = o.trend.as_ref().map(|t| t[i]).unwrap_or(0.0);
                    t + if free { o.mu[i] } else { 0.0 }
                })
                .collect()
        }
        FactorModel::Carma(_) => vec![0.0],
        FactorModel::LsKernel(m) => vec![0.0; m.out_dim()],
        FactorModel::Composite(b) => b.iter().flat_map(drift_vector).collect(),
    }
}

/// Stationary mean and covariance of a stationary model, for any driver.
fn stationary_moments(model: &FactorModel) -> Result<(Vec<f64>, DenseMatrix)> {
    match model {
        FactorModel::DriftedBm(b) => Ok((b.x0.clone(), DenseMatrix::zeros(b.x0.len(), b.x0.len()))),
        FactorModel::MvOu(_) | FactorModel::Carma(_) => {
            let sde = LinearSde::of(model).expect("linear model");
            let v = lyapunov_stationary_cov(&sde.c, &sde.noise_cov())?;
            let mean = sde.h.matvec_unchecked(&sde.stationary_mean()?);
            let cov = sde.h.mul_unchecked(&v).mul_unchecked(&sde.h.transpose()).symmetrize();
            Ok((mean, cov))
        }
        FactorModel::LsKernel(m) => Ok((vec![0.0; m.out_dim()], ls_stationary_cov(m)?)),
        FactorModel::Composite(blocks) => {
            let mut mean = Vec::new();
            let mut covs = Vec::new();
            for b in blocks {
                let (mu, c) = stationary_moments(b)?;
                mean.extend(mu);
                covs.push(c);
            }
            let refs: Vec<&DenseMatrix> = covs.iter().collect();
            Ok((mean, DenseMatrix::block_diag(&refs)))
        }
    }
}

fn check_dims(model: &FactorModel, sys: &PricingSystem) -> Result<()> {
    if model.dim() != sys.n() {
        return Err(Error::dim("model dimension vs pricing matrix columns", sys.n(), model.dim()));
    }
    Ok(())
}

/// Block-stationarity of the leading `m` coordinates: `(stationary, reason)`.
fn block_status(model: &FactorModel, m: usize) -> (bool, Option<String>) {
    if m == 0 {
        return (true, Some("empty_block".into()));
    }
    match leading_block(model, m) {
        Some(b) => {
            let v = classify_stationary(&b);
            (v.is_stationary(), Some(v.reason))
        }
        None => (false, None),
    }
}

/// Analytic classification with drift screening and an empirical fallback.
pub fn classify(model: &FactorModel, sys: &PricingSystem, opts: &EmpiricalOptions) -> Result<CointReport> {
    check_dims(model, sys)?;
    let m = sys.require_m()?;
    let c = sys.require_c()?;
    let loading = sys.factor_loading()?;
    let pair = is_coint_pair(&sys.p, c, m)?;
    let (block_stationary, block_reason) = block_status(model, m);
    let drift = drift_vector(model);
    let drift_loading = dot(&loading, &drift);
    let in_declared_span = sys.coint_space()?.contains(&loading)?;
    let mut details = CointDetails {
        loading: loading.clone(),
        coint_pair: pair.yes,
        coint_pair_residual: pair.residual,
        block_reason,
        block_stationary,
        drift_loading,
        in_declared_span,
        cf: None,
    };
    let report = |verdict, details| CointReport {
        verdict,
        details,
        z_grid: opts.z_grid.clone(),
    };
    if norm2(&loading) == 0.0 || (pair.yes && block_stationary) {
        return Ok(report(Verdict::CointegratedAnalytic, details));
    }
    if drift_loading.abs() > DRIFT_TOL * norm2(&loading) * norm2(&drift).max(1.0) {
        return Ok(report(Verdict::NotCointegrated, details));
    }
    let (t1, t2) = opts.times(model);
    let stat = empirical_cf_convergence(model, sys, t1, t2, &opts.z_grid, opts.n_paths, opts.n_boot, opts.seed)?;
    let verdict = if stat.is_stationary() {
        Verdict::CointegratedEmpirical
    } else if in_declared_span && stat.d() <= INCONCLUSIVE_BAND * stat.d_star() {
        Verdict::Inconclusive
    } else {
        Verdict::NotCointegrated
    };
    details.cf = Some(stat);
    Ok(report(verdict, details))
}

/// Compares the empirical CF of `c^T P X` at `t1` and `t2`. The two
/// samples come from disjoint path sets of one ensemble of `2 n_paths`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_cf_convergence(
    model: &FactorModel,
    sys: &PricingSystem,
    t1: f64,
    t2: f64,
    z_grid: &[f64],
    n_paths: usize,
    n_boot: usize,
    seed: u64,
) -> Result<CfStatistic> {
    check_dims(model, sys)?;
    if n_paths < MIN_PATHS {
        return Err(Error::InsufficientSamples {
            needed: MIN_PATHS,
            got: n_paths,
        });
    }
    if !(t1 > 0.0 && t1 < t2 && t2.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < t1 < t2, got t1={t1}, t2={t2}")));
    }
    let b = burn_in(model);
    if t1 < b {
        return Err(Error::Precondition(format!("t1={t1} precedes the burn-in horizon {b}")));
    }
    cf_test::half_grid(z_grid)?;
    let loading = sys.factor_loading()?;
    let grid = TimeGrid::new(vec![t1, t2])?;
    let e = simulate(model, &grid, 2 * n_paths, seed)?;
    let s1 = e.project(0, &loading)?;
    let s2 = e.project(1, &loading)?;
    let test = cf_two_sample_test(&s1[..n_paths], &s2[n_paths..], z_grid, n_boot, seed)?;
    Ok(CfStatistic {
        t1,
        t2,
        n_paths,
        seed,
        z_grid: z_grid.to_vec(),
        test,
    })
}

/// Scalar limit law of `c^T P X(t)` as `t → ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingLaw {
    pub mean: f64,
    pub variance: f64,
    /// `false` when only the first two moments are known.
    pub gaussian: bool,
}

/// Limit law for analytically cointegrated pairs. `Ok(None)` when the pair
/// is not analytically cointegrated. Non-Gaussian drivers give an
/// `Unsupported` error carrying the moments.
pub fn limiting_law(model: &FactorModel, sys: &PricingSystem) -> Result<Option<LimitingLaw>> {
    check_dims(model, sys)?;
    let m = sys.require_m()?;
    let c = sys.require_c()?;
    let loading = sys.factor_loading()?;
    if norm2(&loading) == 0.0 {
        return Ok(Some(LimitingLaw {
            mean: 0.0,
            variance: 0.0,
            gaussian: true,
        }));
    }
    let pair = is_coint_pair(&sys.p, c, m)?;
    let (stationary, _) = block_status(model, m);
    if !(pair.yes && stationary) {
        return Ok(None);
    }
    let block = leading_block(model, m).expect("separable block");
    let (mean, cov) = stationary_moments(&block)?;
    let a = &loading[..m];
    let law = LimitingLaw {
        mean: dot(a, &mean),
        variance: cov.quad_form(a),
        gaussian: gaussian_block(&block),
    };
    if !law.gaussian {
        return Err(Error::Unsupported(format!(
            "limit law is not Gaussian; moments only: mean {}, variance {}",
            law.mean, law.variance
        )));
    }
    Ok(Some(law))
}

fn gaussian_block(model: &FactorModel) -> bool {
    match model {
        FactorModel::DriftedBm(_) => true,
        FactorModel::MvOu(o) => o.driver.is_gaussian(),
        FactorModel::Carma(c) => c.driver.is_gaussian(),
        FactorModel::LsKernel(l) => l.driver.is_gaussian(),
        FactorModel::Composite(b) => b.iter().all(gaussian_block),
    }
}

/// Moments of the limit law regardless of the driver.
pub fn limiting_moments(model: &FactorModel, sys: &PricingSystem) -> Result<Option<LimitingLaw>> {
    match limiting_law(model, sys) {
        Err(Error::Unsupported(_)) => {
            let m = sys.require_m()?;
            let block = leading_block(model, m).expect("separable block");
            let (mean, cov) = stationary_moments(&block)?;
            let loading = sys.factor_loading()?;
            let a = &loading[..m];
            Ok(Some(LimitingLaw {
                mean: dot(a, &mean),
                variance: cov.quad_form(a),
                gaussian: false,
            }))
        }
        other => other,
    }
}

#[cfg(test)]
mod tests;
