// SPDX-License-Identifier: Apache-2.0

use serde::Deserialize;

use crate::coint_analysis::{default_z_grid, DEFAULT_N_BOOT};
use crate::error::{Error, Result};
use crate::factor_models::{DriverSpec, ExpTerm, FactorModel, JumpSpec, KernelFn, LsKernel, Start};
use crate::hilbert_curves::{WeightSpec, DEFAULT_GRID_POINTS, DEFAULT_WEIGHT_RATE};
use crate::numerics::DenseMatrix;
use crate::pricing_system::PricingSystem;
use crate::simulation::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    CheckCoint,
    Forward,
    Curve,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::CheckCoint => "check-coint",
            Command::Forward => "forward",
            Command::Curve => "curve",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(Command::Simulate),
            "check-coint" => Some(Command::CheckCoint),
            "forward" => Some(Command::Forward),
            "curve" => Some(Command::Curve),
            _ => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<String>,
    seed: Option<u64>,
    model: Option<RawModel>,
    driver: Option<RawDriver>,
    pricing: Option<RawPricing>,
    simulation: Option<RawSimulation>,
    analysis: Option<RawAnalysis>,
    forward: Option<RawForward>,
    curve: Option<RawCurve>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    mu: Option<Vec<f64>>,
    c: Option<Vec<Vec<f64>>>,
    sigma: Option<Vec<Vec<f64>>>,
    x0: Option<Vec<f64>>,
    start: Option<String>,
    trend: Option<Vec<f64>>,
    p: Option<usize>,
    q: Option<usize>,
    alpha: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    rates: Option<Vec<f64>>,
    weights: Option<Vec<Vec<Vec<f64>>>>,
    two_sided: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDriver {
    kind: Option<String>,
    cov: Option<Vec<Vec<f64>>>,
    jump_rate: Option<f64>,
    jump_mean: Option<Vec<f64>>,
    jump_cov: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPricing {
    p: Option<Vec<Vec<f64>>>,
    c: Option<Vec<f64>>,
    m: Option<usize>,
    declared: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    times: Option<Vec<f64>>,
    t_end: Option<f64>,
    steps: Option<usize>,
    n_paths: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    t1: Option<f64>,
    t2: Option<f64>,
    n_paths: Option<usize>,
    n_boot: Option<usize>,
    z_grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForward {
    kind: Option<String>,
    x_grid: Vec<f64>,
    states: Option<Vec<Vec<f64>>>,
    t: Option<f64>,
    check_at: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpCurve {
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub amp: f64,
    #[serde(default)]
    pub rate: f64,
}

impl ExpCurve {
    /// `level + amp * exp(-rate x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.level + self.amp * (-self.rate * x).exp()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    alpha: Option<f64>,
    x_max: Option<f64>,
    points: Option<usize>,
    g0: Option<ExpCurve>,
    vols: Vec<ExpCurve>,
    cov: Option<Vec<Vec<f64>>>,
    times: Option<Vec<f64>>,
    t_end: Option<f64>,
    steps: Option<usize>,
    n_paths: Option<usize>,
    record: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardKind {
    Affine,
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub grid: TimeGrid,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub n_paths: usize,
    pub n_boot: usize,
    pub z_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSettings {
    pub kind: ForwardKind,
    pub x_grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub t: Option<f64>,
    pub check_at: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CurveSettings {
    pub weight: WeightSpec,
    pub x_max: f64,
    pub points: usize,
    pub g0: ExpCurve,
    pub vols: Vec<ExpCurve>,
    pub driver: DriverSpec,
    pub grid: TimeGrid,
    pub n_paths: usize,
    /// Maturities to record; the whole curve when `None`.
    pub record: Option<Vec<f64>>,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub model: Option<FactorModel>,
    pub pricing: Option<PricingSystem>,
    pub simulation: Option<SimulationSettings>,
    pub analysis: AnalysisSettings,
    pub forward: Option<ForwardSettings>,
    pub curve: Option<CurveSettings>,
}

impl RunConfig {
    pub fn require_model(&self) -> Result<&FactorModel> {
        self.model.as_ref().ok_or_else(|| Error::config("model", "section is required for this command"))
    }

    pub fn require_pricing(&self) -> Result<&PricingSystem> {
        self.pricing.as_ref().ok_or_else(|| Error::config("pricing", "section is required for this command"))
    }

    /// Applies `--paths` to every path count in the configuration.
    pub fn override_paths(&mut self, n: usize) {
        if let Some(s) = &mut self.simulation {
            s.n_paths = n;
        }
        self.analysis.n_paths = n;
        if let Some(c) = &mut self.curve {
            c.n_paths = n;
        }
    }
}

fn matrix(rows: &[Vec<f64>], key: &str) -> Result<DenseMatrix> {
    if rows.is_empty() {
        return Err(Error::config(key, "matrix has no rows"));
    }
    let cols = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::config(
            key,
            format!("row {i} has {} entries, row 0 has {cols}", rows[i].len()),
        ));
    }
    DenseMatrix::from_rows(rows).map_err(|e| Error::config(key, e.to_string()))
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(key, "missing"))
}

fn check_len(v: &[f64], n: usize, key: &str, against: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::config(
            key,
            format!("dimension mismatch: length {} but {against} is {n}", v.len()),
        ));
    }
    Ok(())
}

fn wrap<T>(r: Result<T>, key: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

fn build_driver(raw: Option<&RawDriver>, dim: usize) -> Result<DriverSpec> {
    let Some(raw) = raw else {
        return Ok(DriverSpec::standard(dim));
    };
    let cov = match &raw.cov {
        Some(c) => matrix(c, "driver.cov")?,
        None => DenseMatrix::identity(dim),
    };
    if cov.rows() != dim || cov.cols() != dim {
        return Err(Error::config(
            "driver.cov",
            format!("dimension mismatch: {}x{} but the model needs {dim}x{dim}", cov.rows(), cov.cols()),
        ));
    }
    match raw.kind.as_deref().unwrap_or("brownian") {
        "brownian" => {
            if raw.jump_rate.is_some() || raw.jump_mean.is_some() || raw.jump_cov.is_some() {
                return Err(Error::config("driver.kind", "jump keys need kind = \"compound_poisson\""));
            }
            wrap(DriverSpec::brownian(cov), "driver.cov")
        }
        "compound_poisson" => {
            let rate = need(raw.jump_rate, "driver.jump_rate")?;
            let mean = raw.jump_mean.clone().unwrap_or_else(|| vec![0.0; dim]);
            check_len(&mean, dim, "driver.jump_mean", "the driver dimension")?;
            let jcov = matrix(need(raw.jump_cov.as_ref(), "driver.jump_cov")?, "driver.jump_cov")?;
            wrap(
                DriverSpec::compound_poisson(cov, JumpSpec { rate, mean, cov: jcov }),
                "driver",
            )
        }
        other => Err(Error::config("driver.kind", format!("unknown driver kind `{other}`"))),
    }
}

fn start_of(raw: &RawModel, n: usize, what: &str) -> Result<Start> {
    match raw.start.as_deref() {
        Some("stationary") => {
            if raw.x0.is_some() {
                return Err(Error::config("model.x0", "not allowed with start = \"stationary\""));
            }
            Ok(Start::Stationary)
        }
        Some("at") | None => {
            let x0 = raw.x0.clone().unwrap_or_else(|| vec![0.0; n]);
            check_len(&x0, n, "model.x0", what)?;
            Ok(Start::At(x0))
        }
        Some(other) => Err(Error::config("model.start", format!("expected `at` or `stationary`, got `{other}`"))),
    }
}

fn reject(present: bool, key: &str, kind: &str) -> Result<()> {
    if present {
        return Err(Error::config(key, format!("not used by model kind `{kind}`")));
    }
    Ok(())
}

fn build_model(raw: &RawModel, driver: Option<&RawDriver>) -> Result<FactorModel> {
    let kind = raw.kind.as_str();
    match kind {
        "mv_ou" => {
            for (p, k) in [
                (raw.p.is_some(), "model.p"),
                (raw.q.is_some(), "model.q"),
                (raw.alpha.is_some(), "model.alpha"),
                (raw.b.is_some(), "model.b"),
                (raw.rates.is_some(), "model.rates"),
                (raw.weights.is_some(), "model.weights"),
                (raw.two_sided.is_some(), "model.two_sided"),
            ] {
                reject(p, k, kind)?;
            }
            let c = matrix(need(raw.c.as_ref(), "model.c")?, "model.c")?;
            let n = c.rows();
            if c.cols() != n {
                return Err(Error::config("model.c", format!("must be square, got {}x{}", n, c.cols())));
            }
            let mu = raw.mu.clone().unwrap_or_else(|| vec![0.0; n]);
            check_len(&mu, n, "model.mu", "the size of model.c")?;
            let sigma = matrix(need(raw.sigma.as_ref(), "model.sigma")?, "model.sigma")?;
            if sigma.rows() != n {
                return Err(Error::config(
                    "model.sigma",
                    format!("dimension mismatch: {} rows but model.c is {n}x{n}", sigma.rows()),
                ));
            }
            let drv = build_driver(driver, sigma.cols())?;
            let start = start_of(raw, n, "the size of model.c")?;
            let m = wrap(FactorModel::mv_ou(mu, c, sigma, drv, start), "model")?;
            match &raw.trend {
                Some(tr) => {
                    check_len(tr, n, "model.trend", "the size of model.c")?;
                    wrap(m.with_trend(tr.clone()), "model.trend")
                }
                None => Ok(m),
            }
        }
        "drifted_bm" => {
            for (p, k) in [
                (raw.c.is_some(), "model.c"),
                (raw.start.is_some(), "model.start"),
                (raw.trend.is_some(), "model.trend"),
                (raw.p.is_some(), "model.p"),
                (raw.q.is_some(), "model.q"),
                (raw.alpha.is_some(), "model.alpha"),
                (raw.b.is_some(), "model.b"),
                (raw.rates.is_some(), "model.rates"),
                (raw.weights.is_some(), "model.weights"),
                (raw.two_sided.is_some(), "model.two_sided"),
                (driver.is_some(), "driver"),
            ] {
                reject(p, k, kind)?;
            }
            let sigma = matrix(need(raw.sigma.as_ref(), "model.sigma")?, "model.sigma")?;
            let n = sigma.rows();
            let mu = raw.mu.clone().unwrap_or_else(|| vec![0.0; n]);
            check_len(&mu, n, "model.mu", "the row count of model.sigma")?;
            let x0 = raw.x0.clone().unwrap_or_else(|| vec![0.0; n]);
            check_len(&x0, n, "model.x0", "the row count of model.sigma")?;
            wrap(FactorModel::drifted_bm(mu, sigma, x0), "model")
        }
        "carma" => {
            for (pr, k) in [
                (raw.mu.is_some(), "model.mu"),
                (raw.c.is_some(), "model.c"),
                (raw.sigma.is_some(), "model.sigma"),
                (raw.trend.is_some(), "model.trend"),
                (raw.rates.is_some(), "model.rates"),
                (raw.weights.is_some(), "model.weights"),
                (raw.two_sided.is_some(), "model.two_sided"),
            ] {
                reject(pr, k, kind)?;
            }
            let p = need(raw.p, "model.p")?;
            let q = need(raw.q, "model.q")?;
            let alpha = need(raw.alpha.clone(), "model.alpha")?;
            check_len(&alpha, p, "model.alpha", "model.p")?;
            let b = need(raw.b.clone(), "model.b")?;
            let drv = build_driver(driver, 1)?;
            let start = start_of(raw, p, "model.p")?;
            wrap(FactorModel::carma(p, q, alpha, b, drv, start), "model")
        }
        "ls_exp" => {
            for (pr, k) in [
                (raw.mu.is_some(), "model.mu"),
                (raw.c.is_some(), "model.c"),
                (raw.sigma.is_some(), "model.sigma"),
                (raw.x0.is_some(), "model.x0"),
                (raw.start.is_some(), "model.start"),
                (raw.trend.is_some(), "model.trend"),
                (raw.p.is_some(), "model.p"),
                (raw.q.is_some(), "model.q"),
                (raw.alpha.is_some(), "model.alpha"),
                (raw.b.is_some(), "model.b"),
            ] {
                reject(pr, k, kind)?;
            }
            let rates = need(raw.rates.clone(), "model.rates")?;
            let weights = need(raw.weights.as_ref(), "model.weights")?;
            if weights.len() != rates.len() {
                return Err(Error::config(
                    "model.weights",
                    format!("dimension mismatch: {} matrices but model.rates has {}", weights.len(), rates.len()),
                ));
            }
            let terms = rates
                .iter()
                .zip(weights)
                .map(|(r, w)| Ok(ExpTerm { weight: matrix(w, "model.weights")?, rate: *r }))
                .collect::<Result<Vec<_>>>()?;
            let k = terms.first().map(|t| t.weight.cols()).unwrap_or(0);
            let kernel = wrap(KernelFn::exp_sum(terms), "model.weights")?;
            let drv = build_driver(driver, k)?;
            let ls = wrap(LsKernel::new(kernel, drv, raw.two_sided.unwrap_or(true)), "model")?;
            Ok(FactorModel::ls_kernel(ls))
        }
        other => Err(Error::config(
            "model.kind",
            format!("unknown model kind `{other}` (mv_ou, drifted_bm, carma, ls_exp)"),
        )),
    }
}

fn build_pricing(raw: &RawPricing, n: usize) -> Result<PricingSystem> {
    let p = match &raw.p {
        Some(rows) => matrix(rows, "pricing.p")?,
        None => DenseMatrix::identity(n),
    };
    if p.cols() != n {
        return Err(Error::config(
            "pricing.p",
            format!("dimension mismatch: {} columns but the model has dimension {n}", p.cols()),
        ));
    }
    if let Some(c) = &raw.c {
        if c.len() != p.rows() {
            return Err(Error::config(
                "pricing.c",
                format!(
                    "dimension mismatch: pricing.c has length {} but pricing.p has {} rows",
                    c.len(),
                    p.rows()
                ),
            ));
        }
    }
    if let Some(m) = raw.m {
        if m > n {
            return Err(Error::config(
                "pricing.m",
                format!("dimension mismatch: m = {m} exceeds the model dimension {n}"),
            ));
        }
    }
    let mut sys = wrap(PricingSystem::new(p, raw.c.clone(), raw.m), "pricing")?;
    if let Some(dirs) = &raw.declared {
        for d in dirs {
            check_len(d, n, "pricing.declared", "the model dimension")?;
        }
        sys = wrap(sys.with_declared_directions(dirs.clone()), "pricing.declared")?;
    }
    Ok(sys)
}

fn time_grid(times: Option<Vec<f64>>, t_end: Option<f64>, steps: Option<usize>, sect: &str) -> Result<TimeGrid> {
    match (times, t_end) {
        (Some(_), Some(_)) => Err(Error::config(
            format!("{sect}.t_end"),
            format!("give either {sect}.times or {sect}.t_end, not both"),
        )),
        (Some(t), None) => {
            if steps.is_some() {
                return Err(Error::config(format!("{sect}.steps"), format!("only used with {sect}.t_end")));
            }
            wrap(TimeGrid::new(t), &format!("{sect}.times"))
        }
        (None, Some(end)) => {
            let n = steps.unwrap_or(100);
            wrap(TimeGrid::uniform(end, n), &format!("{sect}.t_end"))
        }
        (None, None) => Err(Error::config(format!("{sect}.times"), format!("missing (or give {sect}.t_end)"))),
    }
}

fn positive(n: usize, key: &str) -> Result<usize> {
    if n == 0 {
        return Err(Error::config(key, "must be positive"));
    }
    Ok(n)
}

fn toml_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let key = msg
        .split('`')
        .nth(1)
        .filter(|k| !k.is_empty())
        .map(str::to_string)
        .unwrap_or_else(|| "config".into());
    Error::config(key, msg.trim().to_string())
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(toml_error)?;
    let command = match &raw.command {
        Some(s) => Some(Command::parse(s).ok_or_else(|| {
            Error::config("command", format!("unknown command `{s}` (simulate, check-coint, forward, curve)"))
        })?),
        None => None,
    };
    let seed = need(raw.seed, "seed")?;
    if raw.model.is_none() && raw.driver.is_some() {
        return Err(Error::config("driver", "needs a [model] section"));
    }
    let model = match &raw.model {
        Some(m) => Some(build_model(m, raw.driver.as_ref())?),
        None => None,
    };
    let pricing = match (&raw.pricing, &model) {
        (Some(p), Some(m)) => Some(build_pricing(p, m.dim())?),
        (Some(_), None) => return Err(Error::config("pricing", "needs a [model] section")),
        (None, Some(m)) => Some(build_pricing(
            &RawPricing {
                p: None,
                c: None,
                m: None,
                declared: None,
            },
            m.dim(),
        )?),
        (None, None) => None,
    };
    let simulation = match raw.simulation {
        Some(s) => Some(SimulationSettings {
            grid: time_grid(s.times, s.t_end, s.steps, "simulation")?,
            n_paths: positive(s.n_paths.unwrap_or(1000), "simulation.n_paths")?,
        }),
        None => None,
    };
    let analysis = match raw.analysis {
        Some(a) => AnalysisSettings {
            t1: a.t1,
            t2: a.t2,
            n_paths: positive(a.n_paths.unwrap_or(10_000), "analysis.n_paths")?,
            n_boot: positive(a.n_boot.unwrap_or(DEFAULT_N_BOOT), "analysis.n_boot")?,
            z_grid: a.z_grid.unwrap_or_else(default_z_grid),
        },
        None => AnalysisSettings {
            t1: None,
            t2: None,
            n_paths: 10_000,
            n_boot: DEFAULT_N_BOOT,
            z_grid: default_z_grid(),
        },
    };
    let forward = match raw.forward {
        Some(f) => {
            let kind = match f.kind.as_deref().unwrap_or("affine") {
                "affine" => ForwardKind::Affine,
                "geometric" => ForwardKind::Geometric,
                other => {
                    return Err(Error::config("forward.kind", format!("expected `affine` or `geometric`, got `{other}`")))
                }
            };
            let n = model.as_ref().map(|m| m.dim()).ok_or_else(|| Error::config("forward", "needs a [model] section"))?;
            let states = match f.states {
                Some(s) => s,
                None => match model.as_ref() {
                    Some(FactorModel::MvOu(m)) => match &m.start {
                        Start::At(x0) => vec![x0.clone()],
                        Start::Stationary => {
                            return Err(Error::config("forward.states", "missing; required for a stationary start"))
                        }
                    },
                    Some(FactorModel::DriftedBm(m)) => vec![m.x0.clone()],
                    _ => return Err(Error::config("forward.states", "missing")),
                },
            };
            if states.is_empty() {
                return Err(Error::config("forward.states", "needs at least one state"));
            }
            for s in &states {
                check_len(s, n, "forward.states", "the model dimension")?;
            }
            Some(ForwardSettings {
                kind,
                x_grid: f.x_grid,
                states,
                t: f.t,
                check_at: f.check_at.unwrap_or_default(),
            })
        }
        None => None,
    };
    let curve = match raw.curve {
        Some(c) => {
            if c.vols.is_empty() {
                return Err(Error::config("curve.vols", "needs at least one vol curve"));
            }
            let k = c.vols.len();
            let driver = match &c.cov {
                Some(rows) => {
                    let cov = matrix(rows, "curve.cov")?;
                    if cov.rows() != k || cov.cols() != k {
                        return Err(Error::config(
                            "curve.cov",
                            format!("dimension mismatch: {}x{} but curve.vols has {k} entries", cov.rows(), cov.cols()),
                        ));
                    }
                    wrap(DriverSpec::brownian(cov), "curve.cov")?
                }
                None => DriverSpec::standard(k),
            };
            let weight = wrap(WeightSpec::exponential(c.alpha.unwrap_or(DEFAULT_WEIGHT_RATE)), "curve.alpha")?;
            let x_max = c.x_max.unwrap_or(20.0);
            if !(x_max > 0.0 && x_max.is_finite()) {
                return Err(Error::config("curve.x_max", "must be positive and finite"));
            }
            let points = c.points.unwrap_or(DEFAULT_GRID_POINTS);
            if points < 3 {
                return Err(Error::config("curve.points", "need at least 3 points"));
            }
            if let Some(r) = &c.record {
                if let Some(x) = r.iter().find(|x| !(**x >= 0.0 && **x <= x_max)) {
                    return Err(Error::config("curve.record", format!("maturity {x} outside [0, curve.x_max]")));
                }
            }
            Some(CurveSettings {
                weight,
                x_max,
                points,
                g0: c.g0.unwrap_or(ExpCurve {
                    level: 0.0,
                    amp: 0.0,
                    rate: 0.0,
                }),
                vols: c.vols,
                driver,
                grid: time_grid(c.times, c.t_end, c.steps, "curve")?,
                n_paths: positive(c.n_paths.unwrap_or(1000), "curve.n_paths")?,
                record: c.record,
            })
        }
        None => None,
    };
    Ok(RunConfig {
        command,
        seed,
        model,
        pricing,
        simulation,
        analysis,
        forward,
        curve,
    })
}
