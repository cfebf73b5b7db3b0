//! Trace-driven simulation of die-stacked DRAM organizations.
//!
//! The input is a stream of last-level SRAM cache (LLSC) misses and dirty
//! evictions. Each organization decides, record by record, whether the
//! access is served by the die-stacked DRAM (managed as memory, as a
//! cache, or as a mix of both) or by the off-chip DRAM, and accounts every
//! byte it moves in a per-device traffic ledger. On top of that sit
//! offline page-frequency profiling, the average-hits-per-frame capacity
//! partitioning algorithm, and a bandwidth-bound performance model.

pub mod dram;
pub mod error;
pub mod metrics;
pub mod orgs;
pub mod partition;
pub mod profiler;
pub mod trace;

pub use error::{Error, Result};
