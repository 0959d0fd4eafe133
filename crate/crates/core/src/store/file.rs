use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::{
    check_access, check_page_size, Access, AccessKind, IoAccounting, IoCounters, PageStore,
};
use crate::error::{Error, Result};

/// A store backed by one file of `page_count * page_size` bytes.
#[derive(Debug)]
pub struct FileStore {
    file: File,
    page_size: usize,
    page_count: u64,
    accounting: IoAccounting,
}

impl FileStore {
    /// Creates (or truncates) `path` as a sparse file of the requested size.
    pub fn create(path: impl AsRef<Path>, page_count: u64, page_size: usize) -> Result<Self> {
        check_page_size(page_size)?;
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)?;
        file.set_len(page_count * page_size as u64)?;
        Ok(Self {
            file,
            page_size,
            page_count,
            accounting: IoAccounting::default(),
        })
    }

    /// Opens an existing store; the file length must be a whole number of pages.
    pub fn open(path: impl AsRef<Path>, page_size: usize) -> Result<Self> {
        check_page_size(page_size)?;
        let file = OpenOptions::new().read(true).write(true).open(path)?;
        let len = file.metadata()?.len();
        if len % page_size as u64 != 0 {
            return Err(Error::InvalidGeometry(format!(
                "file length {len} is not a multiple of the page size {page_size}"
            )));
        }
        Ok(Self {
            file,
            page_size,
            page_count: len / page_size as u64,
            accounting: IoAccounting::default(),
        })
    }

    pub fn sync(&mut self) -> Result<()> {
        self.file.sync_data()?;
        Ok(())
    }
}

impl PageStore for FileStore {
    fn page_size(&self) -> usize {
        self.page_size
    }

    fn page_count(&self) -> u64 {
        self.page_count
    }

    fn read_page(&mut self, index: u64, buf: &mut [u8]) -> Result<()> {
        check_access(index, self.page_count, buf.len(), self.page_size)?;
        self.file
            .seek(SeekFrom::Start(index * self.page_size as u64))?;
        self.file.read_exact(buf)?;
        self.accounting.record(Access {
            kind: AccessKind::Read,
            index,
        });
        Ok(())
    }

    fn write_page(&mut self, index: u64, data: &[u8]) -> Result<()> {
        check_access(index, self.page_count, data.len(), self.page_size)?;
        self.file
            .seek(SeekFrom::Start(index * self.page_size as u64))?;
        self.file.write_all(data)?;
        self.accounting.record(Access {
            kind: AccessKind::Write,
            index,
        });
        Ok(())
    }

    fn counters(&self) -> IoCounters {
        self.accounting.counters()
    }
}
