// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Strictly increasing, nonnegative observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("time grid is empty".into()));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("time grid has non-finite points".into()));
        }
        if points[0] < 0.0 {
            return Err(Error::Parameter(format!("time grid starts at {} < 0", points[0])));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!(
                "time grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `n + 1` equally spaced points on `[0, t_end]`.
    pub fn uniform(t_end: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("uniform grid needs at least one step".into()));
        }
        Self::new((0..=n).map(|i| t_end * i as f64 / n as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point equal to `t` up to `1e-12` relative.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|p| (p - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// Monte Carlo sample array laid out `[path][time][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub dim: usize,
    pub n_paths: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub model_digest: String,
}

impl PathEnsemble {
    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn at(&self, path: usize, t_index: usize) -> &[f64] {
        let off = (path * self.n_times() + t_index) * self.dim;
        &self.values[off..off + self.dim]
    }

    /// Values of `w^T X(t)` across paths.
    pub fn project(&self, t_index: usize, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim {
            return Err(Error::dim("projection weights", self.dim, w.len()));
        }
        if t_index >= self.n_times() {
            return Err(Error::Range(format!("time index {t_index} out of {}", self.n_times())));
        }
        Ok((0..self.n_paths)
            .map(|p| crate::numerics::dot(self.at(p, t_index), w))
            .collect())
    }

    pub fn component(&self, t_index: usize, k: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.at(p, t_index)[k]).collect()
    }

    /// CSV with header `t,path,x1..xdim`, rows by path then time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t,path");
        for k in 1..=self.dim {
            header.push_str(&format!(",x{k}"));
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for p in 0..self.n_paths {
            for (i, t) in self.grid.points().iter().enumerate() {
                line.clear();
                line.push_str(&fmt_num(*t));
                line.push(',');
                line.push_str(&p.to_string());
                for v in self.at(p, i) {
                    line.push(',');
                    line.push_str(&fmt_num(*v));
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: DenseMatrix,
    pub stderr: Vec<f64>,
}

/// Sample mean, covariance (n - 1 denominator) and standard error of the
/// mean at one grid point.
pub fn ensemble_moments(e: &PathEnsemble, t_index: usize) -> Result<Moments> {
    if e.n_paths < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: e.n_paths,
        });
    }
    if t_index >= e.n_times() {
        return Err(Error::Range(format!("time index {t_index} out of {}", e.n_times())));
    }
    let d = e.dim;
    let n = e.n_paths as f64;
    let mut mean = vec![0.0; d];
    for p in 0..e.n_paths {
        for (m, v) in mean.iter_mut().zip(e.at(p, t_index)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut cov = DenseMatrix::zeros(d, d);
    for p in 0..e.n_paths {
        let x = e.at(p, t_index);
        for i in 0..d {
            let di = x[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (x[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let stderr = (0..d).map(|i| (cov[(i, i)] / n).sqrt()).collect();
    Ok(Moments { mean, cov, stderr })
}

/// Sample variance and the standard error of that variance estimate,
/// `sqrt((m4 - s^4) / n)`.
pub fn variance_with_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

/// Mean and standard error of the mean.
pub fn mean_with_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
