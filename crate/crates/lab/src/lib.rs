//! Experiment harness around `stochlab-core`: config parsing, deterministic
//! parallel studies, CSV/JSON/SVG artifacts, and the command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod svg;
pub mod table;

pub use error::{Error, Result};
