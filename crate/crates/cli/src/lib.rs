//! HTTP service and headless command line over `sonotab-core`.

pub mod api;
pub mod config;
pub mod extract;

pub use api::{router, serve, ApiError, AppState, ServeError, ERROR_CODES};
pub use config::{Config, ConfigInvalid};
pub use extract::{run_extract, ExtractOptions, ExtractSummary};
