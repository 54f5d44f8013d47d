pub mod autodiff;
pub mod cli;
pub mod curvature;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod fsio;
pub mod graph;
pub mod model;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
