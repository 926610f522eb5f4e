//! Dual-charge solver for multimarginal optimal transport with Coulomb cost.
//!
//! The Kantorovich potential of the strictly-correlated-electrons problem is
//! parametrized as the electrostatic potential of an external "dual charge"
//! `rho_ext[nu] = sum_i nu_i rho_i` built from a fixed basis of segments (d = 1)
//! or concentric shells (d = 3). The weights are fitted by stochastic gradient
//! ascent on the positive-temperature dual, with the gradient estimated by
//! unadjusted Langevin sampling of the canonical Gibbs ensemble.
//!
//! Module map:
//!
//! - [`kernels`]: pair kernels, N-body Coulomb cost, truncated cost, gradients.
//! - [`model`]: densities, basis sets, dual charges, potentials, Coulomb energies.
//! - [`sampler`]: Langevin sampling and moment estimation.
//! - [`optimizer`]: dual gradient, Nesterov ascent, free-energy estimator.
//! - [`oracles`]: exact one-dimensional comb and two-electron droplet solutions.
//! - [`zero_temp`]: multistart evaluation of `E_N` and of `F_SCE[nu]`.
//! - [`experiment`]: configuration-driven runner and result validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod kernels;
pub mod model;
pub mod optimizer;
pub mod oracles;
pub mod quadrature;
pub mod sampler;
pub mod zero_temp;

pub use error::{Error, Result};
pub use geometry::{Configuration, Dimension, Point};
pub use model::{BasisElement, BasisSet, Density, DualCharge, Potential, Support};
pub use optimizer::{DualProblem, OptimizerConfig, OptimizerState};
pub use sampler::{MomentEstimate, SamplerConfig};
pub use zero_temp::MultistartConfig;
