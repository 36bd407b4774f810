//! Compound-object affordance lab: a deterministic stacking simulator, an
//! effect oracle, graph-convolutional effect predictors and a task planner.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod effects;
pub mod encoder;
pub mod error;
pub mod geometry;
pub mod mogan;
pub mod nn;
pub mod planner;
pub mod predictor;
pub mod report;
pub mod renderer;
pub mod simulator;

pub use error::{Error, Result};
