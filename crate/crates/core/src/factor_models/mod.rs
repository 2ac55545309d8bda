// SPDX-License-Identifier: Apache-2.0

//! Factor processes and their analytic laws.

mod analysis;
mod carma;
mod driver;
mod model;

pub use analysis::{classify_stationary, cumulant, GaussianLaw, StationaryStatus, StationaryVerdict};
pub(crate) use analysis::{
    ls_stationary_cov, psi_integral, LinearSde, DECAY_TOL,
};
pub use carma::build_carma_state_space;
pub use driver::{DriverKind, DriverSpec, JumpSpec};
pub(crate) use model::{decay_horizon, frob};
pub use model::{
    Carma, DriftedBm, ExpTerm, FactorModel, KernelClosure, KernelFn, LsKernel, MvOu, Start,
    KERNEL_TAIL_TOL,
};
