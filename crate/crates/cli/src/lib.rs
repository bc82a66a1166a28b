//! `orgb` command line and HTTP/JSON service.

mod cli;
pub mod report;
pub mod service;
pub mod store;

pub use cli::run_cli;
