// SPDX-License-Identifier: Apache-2.0

//! Seeded Monte Carlo path generation.
//!
//! Every path draws from its own ChaCha8 stream selected by path index, so
//! results do not depend on how paths are spread over worker threads.

mod ensemble;
mod linear;
mod ls;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use ensemble::{
    ensemble_moments, fmt_num, mean_with_stderr, variance_with_stderr, Moments, PathEnsemble,
    TimeGrid,
};
pub use ls::RESOLUTION_TOL;

use crate::error::{Error, Result};
use crate::factor_models::{FactorModel, LinearSde, LsKernel};
use linear::LinearSim;
use ls::LsSim;

/// Per-path generator: stream `path` of the ChaCha8 generator keyed by `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

enum BlockSim {
    Linear(LinearSim),
    Ls(LsSim),
}

impl BlockSim {
    fn out_dim(&self) -> usize {
        match self {
            BlockSim::Linear(s) => s.out_dim(),
            BlockSim::Ls(s) => s.out_dim(),
        }
    }

    fn run_path(&self, rng: &mut ChaCha8Rng, out: &mut [f64], stride: usize, offset: usize) {
        match self {
            BlockSim::Linear(s) => s.run_path(rng, out, stride, offset),
            BlockSim::Ls(s) => s.run_path(rng, out, stride, offset),
        }
    }
}

fn build_blocks(model: &FactorModel, times: &[f64], out: &mut Vec<BlockSim>) -> Result<()> {
    match model {
        FactorModel::Composite(blocks) => {
            for b in blocks {
                build_blocks(b, times, out)?;
            }
        }
        FactorModel::LsKernel(m) => out.push(BlockSim::Ls(LsSim::new(m, &[0.0], times, None)?)),
        _ => {
            let sde = LinearSde::of(model).expect("linear model");
            out.push(BlockSim::Linear(LinearSim::new(sde, times)?));
        }
    }
    Ok(())
}

fn run(
    blocks: &[BlockSim],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    digest: String,
) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::Parameter("n_paths must be positive".into()));
    }
    let dim: usize = blocks.iter().map(|b| b.out_dim()).sum();
    let per_path = grid.len() * dim;
    let mut values = vec![0.0; n_paths * per_path];
    values
        .par_chunks_mut(per_path.max(1))
        .enumerate()
        .for_each(|(p, chunk)| {
            let mut rng = path_rng(seed, p as u64);
            let mut offset = 0;
            for b in blocks {
                b.run_path(&mut rng, chunk, dim, offset);
                offset += b.out_dim();
            }
        });
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            context: format!("simulation produced a non-finite value at flat index {bad}"),
            residual: f64::NAN,
        });
    }
    Ok(PathEnsemble {
        grid: grid.clone(),
        dim,
        n_paths,
        values,
        seed,
        model_digest: digest,
    })
}

/// Simulates `model` on `grid`. Linear-Gaussian parts use exact transitions;
/// LS kernels use a discretized convolution over the truncation horizon.
pub fn simulate(model: &FactorModel, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let mut blocks = Vec::new();
    build_blocks(model, grid.points(), &mut blocks)?;
    run(&blocks, grid, n_paths, seed, model.digest())
}

/// Samples `X(t, x) = ∫ G(t - s + x) dL(s)` for every `x` in `xs` with
/// shared driving noise. Output dimension is `m * xs.len()`, grouped by `x`.
pub fn simulate_ls_field(
    model: &LsKernel,
    xs: &[f64],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate_ls_field_with_step(model, xs, grid, n_paths, seed, None)
}

/// As [`simulate_ls_field`] with an explicit convolution subgrid step.
pub fn simulate_ls_field_with_step(
    model: &LsKernel,
    xs: &[f64],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    step: Option<f64>,
) -> Result<PathEnsemble> {
    let sim = LsSim::new(model, xs, grid.points(), step)?;
    let digest = format!(
        "{}:field{:?}",
        FactorModel::LsKernel(model.clone()).digest(),
        xs
    );
    run(&[BlockSim::Ls(sim)], grid, n_paths, seed, digest)
}

/// Subgrid step the LS simulator would pick for `model`.
pub fn ls_auto_step(model: &LsKernel) -> Result<f64> {
    Ok(LsSim::new(model, &[0.0], &[model.horizon], None)?.step)
}
