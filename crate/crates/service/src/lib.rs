//! Command line, HTTP service and on-disk project store around the
//! proposition matcher.

pub mod config;
pub mod error;
pub mod ops;
pub mod parser;
pub mod server;
pub mod store;

pub use error::{Result, ServiceError};
