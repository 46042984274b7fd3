//! Command-line tools and the session-ingestion service.

pub mod cli;
pub mod server;
pub mod store;
pub mod strategy;
