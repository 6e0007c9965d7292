//! Nonparametric latent feature models with temporally persistent feature
//! instances.
//!
//! Binary feature allocations follow an Indian buffet process; every
//! activated entry starts a *feature instance* that stays on for a
//! geometrically distributed number of consecutive observations, so a single
//! datum can carry several copies of the same latent feature. Observations are
//! a (optionally weighted) linear superposition of Gaussian features.
//!
//! The crate is organised as
//!
//! * [`model`]: domain types, the IBP prior, instance sets and the
//!   linear-Gaussian likelihood with missing-data masks,
//! * [`generative`]: forward simulation, including the Cambridge-bars
//!   synthetic benchmark,
//! * [`inference`]: the MCMC sampler (integer slice sampling of lifetimes,
//!   singleton birth/death moves, conjugate updates, imputation),
//! * [`evaluation`]: held-out MSE and posterior summaries,
//! * [`io`]: CSV ingestion, preprocessing, spectrograms, configuration and
//!   trace serialisation used by the `dynlfm` command line tool.

pub mod error;
pub mod evaluation;
pub mod generative;
pub mod inference;
pub mod io;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    Dataset, FeatureAllocation, FeatureDictionary, HyperPriors, Hyperparameters, InstanceWeights,
    ModelKind, WeightKind,
};
