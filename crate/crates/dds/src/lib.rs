//! Files, trip ingestion and the command line around `dds-core`.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
