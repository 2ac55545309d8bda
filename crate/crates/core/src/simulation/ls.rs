// SPDX-License-Identifier: Apache-2.0

//! Discretized stochastic convolution for LS kernel processes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::linear::normals;
use crate::error::{Error, Result};
use crate::factor_models::{frob, LsKernel};
use crate::numerics::{psd_sqrt, DenseMatrix};

/// Largest admissible `lipschitz * step / sup ‖G‖`.
pub const RESOLUTION_TOL: f64 = 0.02;
const MAX_CELLS: usize = 200_000;

/// Convolution weights for one (time, maturity) pair over a cell window.
#[derive(Debug, Clone)]
struct Window {
    t: f64,
    x: f64,
    lo_time: f64,
    c_lo: usize,
    /// `G(t - mid_c + x)` for cells `c_lo..c_lo + len`, each `m x k`
    /// row-major.
    weights: Vec<f64>,
    /// Deterministic compensator contribution, length `m`.
    comp: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LsSim {
    model: LsKernel,
    cells: Vec<(f64, f64)>,
    windows: Vec<Window>,
    n_times: usize,
    n_x: usize,
    chol: DenseMatrix,
    jump_chol: Option<DenseMatrix>,
    pub step: f64,
}

impl LsSim {
    /// `step = None` picks the largest step passing the resolution rule.
    pub fn new(model: &LsKernel, xs: &[f64], times: &[f64], step: Option<f64>) -> Result<Self> {
        if let Some(x) = xs.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::Domain(format!("time to maturity {x} must be >= 0")));
        }
        if xs.is_empty() {
            return Err(Error::Parameter("no maturities requested".into()));
        }
        let h = model.horizon;
        let g_sup = (0..=256)
            .map(|i| frob(&model.kernel.eval(h * i as f64 / 256.0)))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let auto = if model.lipschitz > 0.0 {
            RESOLUTION_TOL * g_sup / model.lipschitz
        } else {
            h / 64.0
        };
        let step = match step {
            Some(s) => {
                if !(s > 0.0) || model.lipschitz * s > RESOLUTION_TOL * g_sup {
                    return Err(Error::Resolution(format!(
                        "subgrid step {s} too coarse: lipschitz {} * step exceeds {RESOLUTION_TOL} * sup|G| = {}",
                        model.lipschitz,
                        RESOLUTION_TOL * g_sup
                    )));
                }
                s
            }
            None => auto.min(h / 64.0),
        };

        let t_last = *times.last().unwrap();
        let start = if model.two_sided { times[0] - h } else { 0.0 };
        let n_uniform = ((t_last - start) / step).ceil() as usize;
        if n_uniform > MAX_CELLS {
            return Err(Error::Resolution(format!(
                "convolution subgrid needs {n_uniform} cells (limit {MAX_CELLS})"
            )));
        }
        let mut pts: Vec<f64> = (0..=n_uniform)
            .map(|i| (start + i as f64 * step).min(t_last))
            .collect();
        pts.extend(times.iter().copied().filter(|t| *t >= start));
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let eps = 1e-12 * (t_last.abs() + h).max(1.0);
        pts.dedup_by(|a, b| (*a - *b).abs() <= eps);
        let cells: Vec<(f64, f64)> = pts.windows(2).map(|w| (w[0], w[1])).collect();

        let (m, k) = model.kernel.shape();
        let comp_rate = model.driver.jumps().map(|j| (j.rate, j.mean.clone()));
        let mut windows = Vec::with_capacity(times.len() * xs.len());
        for &t in times {
            let lo_time = if model.two_sided { t - h } else { 0.0 };
            let c_lo = cells.partition_point(|c| 0.5 * (c.0 + c.1) < lo_time);
            let c_hi = cells.partition_point(|c| 0.5 * (c.0 + c.1) < t);
            for &x in xs {
                let mut weights = Vec::with_capacity((c_hi - c_lo) * m * k);
                let mut comp = vec![0.0; m];
                for c in &cells[c_lo..c_hi] {
                    let g = model.kernel.eval(t - 0.5 * (c.0 + c.1) + x);
                    if let Some((rate, mean)) = &comp_rate {
                        let gm = g.matvec_unchecked(mean);
                        for (a, b) in comp.iter_mut().zip(gm) {
                            *a -= rate * b * (c.1 - c.0);
                        }
                    }
                    weights.extend_from_slice(g.as_slice());
                }
                windows.push(Window {
                    t,
                    x,
                    lo_time,
                    c_lo,
                    weights,
                    comp,
                });
            }
        }
        Ok(Self {
            chol: psd_sqrt(model.driver.diffusion_cov())?,
            jump_chol: match model.driver.jumps() {
                Some(j) => Some(psd_sqrt(&j.cov)?),
                None => None,
            },
            model: model.clone(),
            cells,
            windows,
            n_times: times.len(),
            n_x: xs.len(),
            step,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.model.out_dim() * self.n_x
    }

    pub fn run_path(&self, rng: &mut ChaCha8Rng, out: &mut [f64], stride: usize, offset: usize) {
        let (m, k) = self.model.kernel.shape();
        let mut dl = vec![0.0; self.cells.len() * k];
        for (ci, c) in self.cells.iter().enumerate() {
            let xi = normals(rng, k);
            let inc = self.chol.matvec_unchecked(&xi);
            let s = (c.1 - c.0).sqrt();
            for (d, v) in dl[ci * k..(ci + 1) * k].iter_mut().zip(inc) {
                *d = v * s;
            }
        }
        // Jump times and sizes over the whole partition.
        let mut jumps: Vec<(f64, Vec<f64>)> = Vec::new();
        if let (Some(j), Some(jc)) = (self.model.driver.jumps(), &self.jump_chol) {
            for c in &self.cells {
                let lam = j.rate * (c.1 - c.0);
                let count = Poisson::new(lam).map(|p| p.sample(rng) as usize).unwrap_or(0);
                for _ in 0..count {
                    let tau = c.0 + rng.random::<f64>() * (c.1 - c.0);
                    let mut size = jc.matvec_unchecked(&normals(rng, k));
                    for (a, b) in size.iter_mut().zip(&j.mean) {
                        *a += b;
                    }
                    jumps.push((tau, size));
                }
            }
        }
        for (wi, w) in self.windows.iter().enumerate() {
            let (ti, xi) = (wi / self.n_x, wi % self.n_x);
            let base = ti * stride + offset + xi * m;
            let dst = &mut out[base..base + m];
            dst.copy_from_slice(&w.comp);
            let mk = m * k;
            for (j, g) in w.weights.chunks_exact(mk).enumerate() {
                let inc = &dl[(w.c_lo + j) * k..(w.c_lo + j + 1) * k];
                for r in 0..m {
                    let row = &g[r * k..(r + 1) * k];
                    dst[r] += row.iter().zip(inc).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            for (tau, size) in &jumps {
                if *tau < w.lo_time || *tau > w.t {
                    continue;
                }
                let g = self.model.kernel.eval(w.t - tau + w.x);
                for (d, v) in dst.iter_mut().zip(g.matvec_unchecked(size)) {
                    *d += v;
                }
            }
        }
        debug_assert_eq!(self.windows.len(), self.n_times * self.n_x);
    }
}
