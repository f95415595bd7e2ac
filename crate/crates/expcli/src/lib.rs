//! Experiment harness for deep linear networks: dataset ingestion, synthetic
//! problems, learning-rate grids, convergence traces, SVG plots and the
//! verification suite.

pub mod config;
pub mod data;
pub mod error;
pub mod grid;
pub mod plot;
pub mod runner;
pub mod suite;

pub use error::{ExpError, Result};
