//! Command-line front end: configuration and the experiment pipeline.

pub mod config;
pub mod experiment;
