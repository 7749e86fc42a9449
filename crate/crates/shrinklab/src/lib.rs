//! Monte Carlo toolkit for filtration-shrinkage experiments: Brownian paths
//! and Itô sums, the Lévy transform and excursion signs, Bayesian drift
//! filtering with parameter extinction, multiplicative decompositions of
//! supermartingales and small completeness examples.

pub mod bayes;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod levy;
pub mod market;
pub mod path;
pub mod projection;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{RngStream, SamplePath, TimeGrid};
