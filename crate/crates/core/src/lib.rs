pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod preprocess;

pub use error::{Error, ErrorClass, Result};
