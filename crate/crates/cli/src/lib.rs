//! Experiment runner for the `eqlab` library: config parsing, dispatch,
//! record emission and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod run;
pub mod schema;
