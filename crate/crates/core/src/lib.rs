//! Preprocessing and evaluation for bird's-eye-view traffic trajectory
//! datasets.
//!
//! Raw drone-recording CSVs and Lanelet2 maps go in; leakage-free 5 Hz
//! prediction scenarios, lane graphs and metric reports come out. The
//! [`pipeline`] module strings the stages together.

pub mod angle;
pub mod error;
pub mod exec;
pub mod format;
pub mod ingest;
pub mod mapgraph;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod record;
pub mod render;
pub mod resample;
pub mod scenario;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
