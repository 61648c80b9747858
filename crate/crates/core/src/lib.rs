//! What-if horizontal partitioning advisor.
//!
//! Derives per-fragment catalog statistics for candidate partitioned schemas
//! from a finest-granularity histogram and bitmap indexes, costs a workload
//! against them, and searches for a cheap schema with a genetic algorithm.

pub mod adaptivity;
pub mod bitmap;
pub mod catalog;
pub mod costmodel;
pub mod data;
pub mod engine;
pub mod error;
pub mod fragmodel;
pub mod optimizer;
pub mod stats;
pub mod value;
pub mod workload;

pub use error::{Error, Result};
