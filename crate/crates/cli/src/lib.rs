//! Command-line front end: scene and record files, PLY clouds, and the
//! `concepts`, `fit`, `run`, `replay` and `evaluate` commands.

pub mod cli;
pub mod commands;
pub mod config;
mod error;
pub mod ply;
pub mod scene;

pub use cli::run_cli;
pub use error::CliError;
