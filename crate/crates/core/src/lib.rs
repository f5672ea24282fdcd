pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod explainer;
pub mod explanation;
pub mod model;
pub mod output;
pub mod realapp;
pub mod tabular;
pub mod transform;

pub use error::{Error, Result};
