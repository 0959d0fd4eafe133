//! Approximate membership query filters.
//!
//! - [`qf::QuotientFilter`]: the in-memory quotient filter.
//! - [`bqf::BufferedQuotientFilter`]: an in-memory buffer flushed into one large on-store filter.
//! - [`cascade::CascadeFilter`]: an in-memory filter over geometrically growing on-store levels.
//! - [`bloom::BloomFilter`]: the classic Bloom filter, for comparison.
//!
//! On-store filters live in a [`store::PageStore`], which counts sequential
//! and random page accesses.

pub mod bloom;
pub mod bqf;
pub mod cascade;
pub mod error;
pub mod fingerprint;
pub mod qf;
pub mod store;

pub use bloom::BloomFilter;
pub use bqf::BufferedQuotientFilter;
pub use cascade::{CascadeConfig, CascadeFilter, LevelInfo};
pub use error::{Error, Result};
pub use fingerprint::{hash_to_fingerprint, hash_u64, Fingerprint, QuotientRemainder};
pub use qf::{ClusterStats, LoadFactor, QfGeometry, QuotientFilter};
