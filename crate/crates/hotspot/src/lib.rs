//! File-based pipeline around `hotspot-core`: configuration, CSV/GeoJSON
//! formats, run metadata and the stages behind the `hotspot` command.

pub mod config;
pub mod error;
pub mod io;
pub mod metadata;
pub mod pipeline;
pub mod scenario;
pub mod timefmt;

pub use config::PipelineConfig;
pub use error::{Error, Result};
