//! Optimal subsampling for M-estimation.
//!
//! Probability engines for subsampling with replacement and Poisson
//! subsampling, two-stage subsample estimators, asymptotic variance
//! objects and a seeded Monte Carlo harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod cli;
pub mod model;
pub mod numeric;
pub mod optprob;
pub mod pipeline;
pub mod sampling;
pub mod solver;
pub mod variance;

pub use dataset::{Dataset, Observation, Schema};
pub use error::{Error, Result};
pub use model::Family;
pub use optprob::{NormVector, PoissonThreshold, SamplingPlan};
pub use sampling::{RngSeed, Scheme, Subsample};
pub use solver::{SolveReport, WeightedProblem};
