//! Adaptive posterior inference for mildly ill-posed inverse problems in
//! sequence form, `Y_i = κ_i μ_i + n^{-1/2} Z_i` with `κ_i ≍ i^{-p}`.
//!
//! The prior regularity `α` of the Gaussian prior `⊗ N(0, i^{-1-2α})` is
//! chosen from the data either by maximizing its marginal likelihood
//! ([`empirical_bayes`]) or by putting a hyperprior on it and sampling
//! ([`hierarchical_bayes`]). [`theory`] evaluates the deterministic quantities
//! that describe where the maximizer falls and how fast the posterior
//! contracts; [`experiment`] runs the simulation study end to end.

pub mod empirical_bayes;
pub mod error;
pub mod experiment;
pub mod gaussian_posterior;
pub mod hierarchical_bayes;
pub mod numeric;
pub mod sequence_model;
pub mod theory;

pub use empirical_bayes::{eb_posterior, fit, log_likelihood, score, EbFit, LikelihoodCurve};
pub use error::{Error, Result};
pub use gaussian_posterior::{posterior, posterior_risk, CoordinatePosterior};
pub use hierarchical_bayes::{run_mwg, HbChain, HbConfig, HyperPrior};
pub use sequence_model::{simulate, ModelSpec, Observation, TruthSpec};
pub use theory::{bracket, h_n, BracketReport};
