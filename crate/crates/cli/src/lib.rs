//! Command-line front end and HTTP service for `profile-gender`.

pub mod cli;
pub mod service;

pub use cli::run_cli;
