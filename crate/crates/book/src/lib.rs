//! The guide under `book/src`, compiled as documentation so every Rust
//! snippet runs under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/tables.md")]
pub mod tables {}

#[doc = include_str!("../../../book/src/preprocessing.md")]
pub mod preprocessing {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}

#[doc = include_str!("../../../book/src/patterns.md")]
pub mod patterns {}

#[doc = include_str!("../../../book/src/reports.md")]
pub mod reports {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
