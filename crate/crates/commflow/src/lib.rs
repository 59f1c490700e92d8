//! Workspace persistence, read-only JSON HTTP API and batch command line
//! over the `commflow-core` analytics.

pub mod api;
pub mod cli;
pub mod error;
pub mod views;
pub mod workspace;

pub use error::AppError;
pub use workspace::Workspace;
