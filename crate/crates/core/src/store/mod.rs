//! Paged storage with I/O accounting.
//!
//! All access is in whole pages. Every store classifies each read and write
//! as sequential (its index is one past the previous access of the same kind)
//! or random, which is what the on-store filters are judged by.

mod file;
mod layout;
mod paged;
mod sim;

use std::io;
use std::ops::Sub;

pub use file::FileStore;
pub use layout::{
    deserialize_qf, read_qf_header, serialize_qf, serialized_pages, OnDiskQfHeader, PageSpan,
    QF_HEADER_LEN, QF_MAGIC,
};
pub use paged::{disk_qf_delete, disk_qf_lookup};
pub use sim::SimStore;

use crate::error::{Error, Result};

pub const DEFAULT_PAGE_SIZE: usize = 4096;

/// Page-level I/O counters. `page_reads = sequential_reads + random_reads`,
/// and likewise for writes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct IoCounters {
    pub page_reads: u64,
    pub page_writes: u64,
    pub sequential_reads: u64,
    pub random_reads: u64,
    pub sequential_writes: u64,
    pub random_writes: u64,
}

impl Sub for IoCounters {
    type Output = IoCounters;

    fn sub(self, earlier: IoCounters) -> IoCounters {
        IoCounters {
            page_reads: self.page_reads - earlier.page_reads,
            page_writes: self.page_writes - earlier.page_writes,
            sequential_reads: self.sequential_reads - earlier.sequential_reads,
            random_reads: self.random_reads - earlier.random_reads,
            sequential_writes: self.sequential_writes - earlier.sequential_writes,
            random_writes: self.random_writes - earlier.random_writes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

/// One page access, as recorded by [`TracingStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub kind: AccessKind,
    pub index: u64,
}

/// Counter state machine shared by the backends.
#[derive(Debug, Clone, Default)]
pub struct IoAccounting {
    counters: IoCounters,
    last_read: Option<u64>,
    last_write: Option<u64>,
}

impl IoAccounting {
    pub fn record(&mut self, access: Access) {
        let c = &mut self.counters;
        match access.kind {
            AccessKind::Read => {
                c.page_reads += 1;
                if self.last_read.map(|l| l + 1) == Some(access.index) {
                    c.sequential_reads += 1;
                } else {
                    c.random_reads += 1;
                }
                self.last_read = Some(access.index);
            }
            AccessKind::Write => {
                c.page_writes += 1;
                if self.last_write.map(|l| l + 1) == Some(access.index) {
                    c.sequential_writes += 1;
                } else {
                    c.random_writes += 1;
                }
                self.last_write = Some(access.index);
            }
        }
    }

    pub fn counters(&self) -> IoCounters {
        self.counters
    }

    /// Counters produced by replaying `trace` from a fresh state.
    pub fn replay(trace: &[Access]) -> IoCounters {
        let mut acc = Self::default();
        trace.iter().for_each(|&a| acc.record(a));
        acc.counters
    }
}

/// A block device of `page_count` pages of `page_size` bytes.
pub trait PageStore {
    fn page_size(&self) -> usize;

    fn page_count(&self) -> u64;

    /// Fills `buf` (exactly one page long) with page `index`.
    fn read_page(&mut self, index: u64, buf: &mut [u8]) -> Result<()>;

    /// Replaces page `index` with `data` (exactly one page long).
    fn write_page(&mut self, index: u64, data: &[u8]) -> Result<()>;

    fn counters(&self) -> IoCounters;
}

impl<S: PageStore + ?Sized> PageStore for Box<S> {
    fn page_size(&self) -> usize {
        (**self).page_size()
    }
    fn page_count(&self) -> u64 {
        (**self).page_count()
    }
    fn read_page(&mut self, index: u64, buf: &mut [u8]) -> Result<()> {
        (**self).read_page(index, buf)
    }
    fn write_page(&mut self, index: u64, data: &[u8]) -> Result<()> {
        (**self).write_page(index, data)
    }
    fn counters(&self) -> IoCounters {
        (**self).counters()
    }
}

impl<S: PageStore + ?Sized> PageStore for &mut S {
    fn page_size(&self) -> usize {
        (**self).page_size()
    }
    fn page_count(&self) -> u64 {
        (**self).page_count()
    }
    fn read_page(&mut self, index: u64, buf: &mut [u8]) -> Result<()> {
        (**self).read_page(index, buf)
    }
    fn write_page(&mut self, index: u64, data: &[u8]) -> Result<()> {
        (**self).write_page(index, data)
    }
    fn counters(&self) -> IoCounters {
        (**self).counters()
    }
}

pub(crate) fn check_access(
    index: u64,
    page_count: u64,
    len: usize,
    page_size: usize,
) -> Result<()> {
    if index >= page_count {
        return Err(Error::OutOfRange { index, page_count });
    }
    if len != page_size {
        return Err(Error::Storage(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("buffer of {len} bytes for a {page_size}-byte page"),
        )));
    }
    Ok(())
}

pub(crate) fn check_page_size(page_size: usize) -> Result<()> {
    if page_size < QF_HEADER_LEN {
        return Err(Error::InvalidGeometry(format!(
            "page size {page_size} is smaller than the {QF_HEADER_LEN}-byte header"
        )));
    }
    Ok(())
}

/// Wraps a store and logs every page access.
pub struct TracingStore<S> {
    inner: S,
    trace: Vec<Access>,
}

impl<S: PageStore> TracingStore<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            trace: Vec::new(),
        }
    }

    pub fn trace(&self) -> &[Access] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<Access> {
        std::mem::take(&mut self.trace)
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: PageStore> PageStore for TracingStore<S> {
    fn page_size(&self) -> usize {
        self.inner.page_size()
    }
    fn page_count(&self) -> u64 {
        self.inner.page_count()
    }
    fn read_page(&mut self, index: u64, buf: &mut [u8]) -> Result<()> {
        self.inner.read_page(index, buf)?;
        self.trace.push(Access {
            kind: AccessKind::Read,
            index,
        });
        Ok(())
    }
    fn write_page(&mut self, index: u64, data: &[u8]) -> Result<()> {
        self.inner.write_page(index, data)?;
        self.trace.push(Access {
            kind: AccessKind::Write,
            index,
        });
        Ok(())
    }
    fn counters(&self) -> IoCounters {
        self.inner.counters()
    }
}
