//! Allocation-only algorithms for detecting urban PM2.5 hotspots from mobile
//! sensor data.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. The pipeline
//! it implements is:
//!
//! 1. [`ingest::clean`] drops duplicate, incomplete and implausible records.
//! 2. [`normalize::normalize`] subtracts a fleet-wide trailing rolling median
//!    so readings from different hours become comparable.
//! 3. [`ensemble`] fits a bag of exponential-kernel Gaussian processes
//!    ([`gp`]) on biased subsamples of the normalized readings.
//! 4. [`hotspot`] turns the bagged posterior at every tile centroid of a
//!    [`geo::TileGrid`] into the probability that the tile exceeds the
//!    city-wide median.
//!
//! [`simulate`] generates synthetic campaigns over a road graph with a known
//! ground truth, and [`evaluate`] scores hotspot maps against it (rank
//! correlation, reliability bins, Brier score, ECE, isotonic recalibration).
#![no_std]

extern crate alloc;

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod geo;
pub mod gp;
pub mod hotspot;
pub mod ingest;
pub mod normalize;
pub mod simulate;
pub mod stats;
pub mod time;

mod linalg;
mod math;
mod optim;

pub use error::{Error, Result};
