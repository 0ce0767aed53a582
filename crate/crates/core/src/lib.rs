//! Backward regularized Wasserstein proximal (BRWP) sampling.
//!
//! The crate evolves densities with the closed-form kernel of the
//! regularized Wasserstein proximal operator, turns them into particle
//! scores, and compares the resulting samplers against the unadjusted
//! Langevin algorithm and an explicit probability-flow discretization.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod potential;
pub mod proximal;
pub mod samplers;
pub mod theory;

pub use density::{GridDensity, ParticleEnsemble};
pub use error::{Error, Result};
pub use grid::{Axis, Grid};
pub use potential::Potential;
pub use proximal::{KernelProx, ProxBackend, ProxParams};
pub use samplers::{Method, RunRecord, Sampler, SamplerConfig};
