//! Workload driver for the filters in `amq-core`: insert-and-lookup
//! benchmarks, false positive measurement and page I/O reports, all written
//! as CSV.
//!
//! Keys are uniform 64-bit integers from a ChaCha8 stream seeded by the
//! caller; a key is hashed as its 8 little-endian bytes. Every column except
//! those starting with `wall_` is a pure function of the configuration.

pub mod config;
pub mod error;
pub mod filter;
pub mod run;
pub mod stats;

pub use config::{Plan, StoreSpec, Structure, WorkloadConfig};
pub use error::{BenchError, Result};
pub use filter::AnyFilter;
pub use run::{
    run_bench, run_fp_test, run_io_report, write_csv, CheckpointRecord, FpReport, IoRecord,
};
