//! Run orchestration, result store and HTTP API.

pub mod api;
pub mod config;
pub mod fixture;
pub mod pipeline;
pub mod store;

pub use api::{router, serve, AppState};
pub use config::{RunConfig, Scenario};
pub use pipeline::{run_pipeline, PipelineOptions, RunOutcome};
pub use store::{RegionStatus, RunManifest, RunStatus, Store};
