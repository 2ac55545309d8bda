// SPDX-License-Identifier: Apache-2.0

//! Batch front end: TOML run configuration, subcommand dispatch and
//! atomically written artifacts.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

pub use config::{
    parse_config, AnalysisSettings, Command, CurveSettings, ExpCurve, ForwardKind, ForwardSettings,
    RunConfig, SimulationSettings,
};

use crate::coint_analysis::{classify, EmpiricalOptions, BOOT_LEVEL, INCONCLUSIVE_BAND};
use crate::error::{Error, Result};
use crate::factor_models::{classify_stationary, FactorModel, KERNEL_TAIL_TOL};
use crate::forward_pricing::{
    affine_kernel_ou, exp_affine_kernel_ou, forward_coint_check, forward_curve_affine, geometric_forward,
    ForwardCurve,
};
use crate::hilbert_curves::{
    banach_constant, geometric_grid, simulate_spread_ou, CurveGrid, Recording, GRID_STRETCH,
};
use crate::numerics::quadrature::DEFAULT_ABS_TOL;
use crate::numerics::RCOND_GATE;
use crate::pricing_system::{EXACT_REL_TOL, RANK_REL_TOL, ZERO_TOL};
use crate::simulation::{fmt_num, simulate, RESOLUTION_TOL};

/// Files written by a run and the report as ordered `key: value` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub report: Vec<(String, String)>,
}

/// Writes `name` under `dir` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| Error::Io(e.to_string()))?.sync_all()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ")
}

struct Report(Vec<(String, String)>);

impl Report {
    fn put(&mut self, k: &str, v: impl ToString) {
        self.0.push((k.to_string(), v.to_string()));
    }
}

fn model_lines(r: &mut Report, model: &FactorModel) {
    r.put("model_kind", model.tag());
    r.put("model_digest", model.digest());
    r.put("model_dim", model.dim());
    let stat = classify_stationary(model);
    r.put("model_stationary", stat.is_stationary());
    r.put("model_stationary_reason", &stat.reason);
    r.put(
        "relaxation_time",
        model.relaxation_time().map(fmt_num).unwrap_or_else(|| "none".into()),
    );
    if let Some(h) = ls_horizon(model) {
        r.put("ls_truncation_horizon", fmt_num(h));
    }
}

fn ls_horizon(model: &FactorModel) -> Option<f64> {
    match model {
        FactorModel::LsKernel(m) => Some(m.horizon),
        FactorModel::Composite(b) => b.iter().filter_map(ls_horizon).reduce(f64::max),
        _ => None,
    }
}

fn tolerance_lines(r: &mut Report) {
    r.put("tol_zero", fmt_num(ZERO_TOL));
    r.put("tol_rank_rel", fmt_num(RANK_REL_TOL));
    r.put("tol_exact_rel", fmt_num(EXACT_REL_TOL));
    r.put("tol_rcond_gate", fmt_num(RCOND_GATE));
    r.put("tol_quadrature_abs", fmt_num(DEFAULT_ABS_TOL));
    r.put("tol_kernel_tail", fmt_num(KERNEL_TAIL_TOL));
    r.put("tol_ls_resolution", fmt_num(RESOLUTION_TOL));
    r.put("cf_boot_level", fmt_num(BOOT_LEVEL));
    r.put("cf_inconclusive_band", fmt_num(INCONCLUSIVE_BAND));
}

fn run_simulate(cfg: &RunConfig, out: &Path, r: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let model = cfg.require_model()?;
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| Error::config("simulation", "section is required for this command"))?;
    model_lines(r, model);
    r.put("n_paths", sim.n_paths);
    r.put("times", list(sim.grid.points()));
    let e = simulate(model, &sim.grid, sim.n_paths, cfg.seed)?;
    files.push(write_atomic(out, "paths.csv", |w| e.write_csv(w))?);
    Ok(())
}

fn run_check(cfg: &RunConfig, out: &Path, r: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let model = cfg.require_model()?;
    let sys = cfg.require_pricing()?;
    sys.require_c().map_err(|_| Error::config("pricing.c", "missing; check-coint needs a candidate vector"))?;
    model_lines(r, model);
    let a = &cfg.analysis;
    let opts = EmpiricalOptions {
        t1: a.t1,
        t2: a.t2,
        z_grid: a.z_grid.clone(),
        n_paths: a.n_paths,
        n_boot: a.n_boot,
        seed: cfg.seed,
    };
    let (t1, t2) = opts.times(model);
    r.put("analysis_t1", fmt_num(t1));
    r.put("analysis_t2", fmt_num(t2));
    r.put("analysis_n_paths", a.n_paths);
    r.put("analysis_n_boot", a.n_boot);
    let rep = classify(model, sys, &opts)?;
    for (k, v) in rep.lines() {
        r.put(&k, v);
    }
    if let Some(cf) = &rep.details.cf {
        files.push(write_atomic(out, "cf.csv", |w| cf.write_csv(w))?);
    }
    Ok(())
}

fn run_forward(cfg: &RunConfig, out: &Path, r: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let model = cfg.require_model()?;
    let sys = cfg.require_pricing()?;
    let fw = cfg
        .forward
        .as_ref()
        .ok_or_else(|| Error::config("forward", "section is required for this command"))?;
    model_lines(r, model);
    r.put(
        "forward_kind",
        match fw.kind {
            ForwardKind::Affine => "affine",
            ForwardKind::Geometric => "geometric",
        },
    );
    r.put("x_grid", list(&fw.x_grid));
    r.put("n_states", fw.states.len());
    let curves: Vec<ForwardCurve> = match fw.kind {
        ForwardKind::Affine => {
            let k = affine_kernel_ou(model)?;
            for x in &fw.check_at {
                if sys.c.is_some() {
                    let chk = forward_coint_check(sys, &k, *x)?;
                    r.put(&format!("forward_coint_x={}", fmt_num(*x)), chk.verdict.as_str());
                }
            }
            fw.states
                .iter()
                .map(|s| forward_curve_affine(sys, &k, s, &fw.x_grid, fw.t))
                .collect::<Result<_>>()?
        }
        ForwardKind::Geometric => {
            if !fw.check_at.is_empty() {
                return Err(Error::config("forward.check_at", "only used with kind = \"affine\""));
            }
            let k = exp_affine_kernel_ou(model)?;
            fw.states
                .iter()
                .map(|s| -> Result<ForwardCurve> {
                    let cols = fw
                        .x_grid
                        .iter()
                        .map(|x| Ok(geometric_forward(sys, &k, s, *x)?.forward))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(ForwardCurve {
                        t: fw.t.unwrap_or(0.0),
                        x_grid: fw.x_grid.clone(),
                        values: (0..sys.d()).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    for (i, c) in curves.iter().enumerate() {
        files.push(write_atomic(out, &format!("forward_{i:03}.csv"), |w| c.write_csv(w))?);
    }
    Ok(())
}

fn run_curve(cfg: &RunConfig, out: &Path, r: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let cs = cfg
        .curve
        .as_ref()
        .ok_or_else(|| Error::config("curve", "section is required for this command"))?;
    let x = Arc::new(geometric_grid(cs.x_max, cs.points, GRID_STRETCH)?);
    let g0 = CurveGrid::from_fn(x.clone(), cs.weight, |v| cs.g0.eval(v))?;
    let vols = cs
        .vols
        .iter()
        .map(|v| CurveGrid::from_fn(x.clone(), cs.weight, |y| v.eval(y)))
        .collect::<Result<Vec<_>>>()?;
    let rec = match &cs.record {
        Some(p) => Recording::Points(p.clone()),
        None => Recording::Curve,
    };
    r.put("weight_alpha", fmt_num(cs.weight.alpha()));
    r.put("curve_x_max", fmt_num(cs.x_max));
    r.put("curve_points", cs.points);
    r.put("curve_grid_stretch", fmt_num(GRID_STRETCH));
    r.put("banach_constant", fmt_num(banach_constant(cs.weight)));
    r.put("n_paths", cs.n_paths);
    r.put("times", list(cs.grid.points()));
    let e = simulate_spread_ou(&g0, &vols, &cs.driver, &cs.grid, cs.n_paths, cfg.seed, &rec)?;
    r.put("curve_digest", &e.digest);
    files.push(write_atomic(out, "curves.csv", |w| e.write_csv(w))?);
    files.push(write_atomic(out, "curves.meta", |w| e.write_meta(w))?);
    Ok(())
}

/// Runs `command` and writes its artifacts plus `report.txt` into `out`.
pub fn run(cfg: &RunConfig, command: Command, out: &Path) -> Result<RunSummary> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::config(
                "command",
                format!("config declares `{}` but `{}` was requested", c.as_str(), command.as_str()),
            ));
        }
    }
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let mut r = Report(Vec::new());
    r.put("command", command.as_str());
    r.put("version", env!("CARGO_PKG_VERSION"));
    r.put("seed", cfg.seed);
    let mut files = Vec::new();
    match command {
        Command::Simulate => run_simulate(cfg, out, &mut r, &mut files)?,
        Command::CheckCoint => run_check(cfg, out, &mut r, &mut files)?,
        Command::Forward => run_forward(cfg, out, &mut r, &mut files)?,
        Command::Curve => run_curve(cfg, out, &mut r, &mut files)?,
    }
    tolerance_lines(&mut r);
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    r.put("outputs", names.join(" "));
    r.put("wall_time_s", format!("{:.3}", start.elapsed().as_secs_f64()));
    let report = r.0;
    files.push(write_atomic(out, "report.txt", |w| {
        for (k, v) in &report {
            writeln!(w, "{k}: {v}")?;
        }
        Ok(())
    })?);
    Ok(RunSummary { files, report })
}

/// Reads, parses and overrides a configuration file.
pub fn load_config(path: &Path, seed: Option<u64>, paths: Option<usize>) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = paths {
        if n == 0 {
            return Err(Error::config("--paths", "must be positive"));
        }
        cfg.override_paths(n);
    }
    Ok(cfg)
}
