//! Command-line runner and HTTP service for time-series visual summaries.

pub mod cli;
pub mod service;
