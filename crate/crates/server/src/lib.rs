//! HTTP annotation service over the shala pipeline, plus the pieces the
//! `shala` command line shares with it.

pub mod api;
pub mod chat;
pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod service;
pub mod session;
pub mod store;

pub use error::ServiceError;
pub use service::Service;
