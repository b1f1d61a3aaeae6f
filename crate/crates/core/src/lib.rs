//! Automated discovery on tabular data.
//!
//! The pipeline reads a CSV into a typed [`table::Table`], cleans it with a
//! [`preprocess::PreprocessPlan`] fitted on training rows, searches a small
//! model zoo ([`automl`]), mines conjunctions of feature conditions whose
//! subgroup shifts the target ([`patterns`]), validates each with one-tailed
//! tests ([`stats`]) and writes a JSON and Markdown report ([`report`]).
//!
//! The guide under `book/` walks through each stage with runnable snippets.

pub mod rng;
pub mod table;
pub mod preprocess;
pub mod matrix;
pub mod metrics;
pub mod models;

pub use models::Task;
pub mod stats;
pub mod patterns;
pub mod automl;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod bench;
