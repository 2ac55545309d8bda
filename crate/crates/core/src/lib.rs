// SPDX-License-Identifier: Apache-2.0

mod error;
pub mod cli;
pub mod coint_analysis;
pub mod factor_models;
pub mod forward_pricing;
pub mod hilbert_curves;
pub mod numerics;
pub mod pricing_system;
pub mod simulation;

pub use error::{Error, Result};
