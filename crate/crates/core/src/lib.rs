//! Redundancy reduction for CT scan volumes.
//!
//! The reduction runs in two stages. The spatial stage low-pass filters each
//! slice, thresholds it into a body mask and crops the scan to the union of
//! the mask bounding boxes. The slice stage measures the enclosed lung area
//! of every slice and keeps the contiguous window of slices carrying the most
//! of it. Slices are then drawn from the window by kernel-density sampling,
//! or by the random and systematic baselines.
//!
//! ```no_run
//! use ctreduce::{config::PipelineConfig, pipeline};
//! # fn main() -> ctreduce::Result<()> {
//! let cfg = PipelineConfig::default();
//! let outcome = pipeline::run_pipeline("corpus".as_ref(), &cfg, None, None)?;
//! pipeline::write_outcome("out".as_ref(), &outcome)?;
//! # Ok(())
//! # }
//! ```

pub mod config;
pub mod error;
pub mod kds;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod slice;
pub mod spatial;
pub mod synthetic;
pub mod volume;

pub use error::{Error, Result};
