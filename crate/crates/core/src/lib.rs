pub mod backend;
pub mod config;
pub mod datasets;
pub mod error;
pub mod metrics;
pub mod orchestrator;
pub mod profiles;
pub mod prompt;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
