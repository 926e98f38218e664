//! Command-line front end and HTTP service for video archives.

pub mod cli;
pub mod jobs;
pub mod server;
