//! Numerical laboratory for the circular Coulomb chain.
//!
//! `N` equally charged particles sit on a circle; consecutive spacings
//! `Y_1, ..., Y_N` in `(0, 1]` carry the Gibbs weight
//! `exp(-H)` with `H = sum_i [ beta / Y_i + gamma / (Y_i + Y_{i+1}) ]`,
//! i.e. nearest and next-to-nearest neighbour Coulomb repulsion.
//!
//! The crate has three legs:
//!
//! * [`kernel`] — exact finite-`N` statistics through a discretized transfer
//!   operator (partition function, marginal/conditional cluster densities,
//!   moments, covariances, spectral decay rate),
//! * [`sampler`] — reproducible Markov-chain Monte Carlo for whole-chain
//!   samples (heat-bath and Metropolis single-site updates),
//! * [`decay`] / [`clt`] — measurement harnesses for exponential
//!   correlation decay between index clusters and for the central limit
//!   behaviour of the normalized spacing sum.

pub mod clt;
pub mod decay;
pub mod kernel;
pub mod model;
pub mod quad;
pub mod sampler;
pub mod stats;

pub use model::{ChainState, IndexCluster, ModelParams};
pub use quad::QuadratureGrid;
