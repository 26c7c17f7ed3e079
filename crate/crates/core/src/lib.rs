//! Bayesian additive and multiplicative effects (AME) models for dyadic
//! and network data.
//!
//! A sociomatrix is modeled through a latent matrix
//! z_ij = β'x_ij + a_i + b_j + u_i'v_j + e_ij, with correlated errors
//! within each dyad and a family-specific link from Z to the observed
//! outcome. Estimation is by Gibbs sampling.

pub mod data;
pub mod design;
pub mod engine;
pub mod dist;
pub mod error;
pub mod factors;
pub mod gof;
pub mod latent;
pub mod srm;
pub mod stats;

pub use data::{CovariateSet, LongitudinalData, Sociomatrix};
pub use design::{build_design, DesignTensor};
pub use engine::{fit_ame, fit_ame_rep, fit_symmetric, FitResult, ModelSpec};
pub use error::{Error, Result};
pub use gof::{gofstats, GofStats};
pub use latent::Family;
