//! Neuroevolution of missing-value-resilient MLP classifiers for smartphone
//! energy consumption.
//!
//! Battery telemetry is labelled by energy consumed per minute ([`data`]),
//! holes are hidden behind a binary input mask, and a population-based
//! optimizer ([`pbmh`]) searches solver, hyperparameters and layer sizes,
//! one hidden layer at a time ([`driver`]). Each candidate is scored by
//! k-fold cross-validation of a masked network ([`objective`], [`network`],
//! [`solvers`]). Benchmarks across optimizers and missing rates are compared
//! with Friedman and Wilcoxon tests ([`stats`], [`analysis`]).

pub mod analysis;
pub mod cli;
pub mod data;
pub mod driver;
pub mod error;
pub mod genome;
pub mod network;
pub mod objective;
pub mod pbmh;
pub mod report;
pub mod seed;
pub mod solvers;
pub mod stats;

pub use error::{Error, Result};
