use super::{
    check_access, check_page_size, Access, AccessKind, IoAccounting, IoCounters, PageStore,
};
use crate::error::Result;

/// In-memory stand-in for an SSD. Pages never written read back as zeros.
#[derive(Debug, Clone)]
pub struct SimStore {
    page_size: usize,
    pages: Vec<Option<Box<[u8]>>>,
    accounting: IoAccounting,
}

impl SimStore {
    pub fn new(page_count: u64, page_size: usize) -> Result<Self> {
        check_page_size(page_size)?;
        Ok(Self {
            page_size,
            pages: vec![None; page_count as usize],
            accounting: IoAccounting::default(),
        })
    }
}

impl PageStore for SimStore {
    fn page_size(&self) -> usize {
        self.page_size
    }

    fn page_count(&self) -> u64 {
        self.pages.len() as u64
    }

    fn read_page(&mut self, index: u64, buf: &mut [u8]) -> Result<()> {
        check_access(index, self.page_count(), buf.len(), self.page_size)?;
        match &self.pages[index as usize] {
            Some(page) => buf.copy_from_slice(page),
            None => buf.fill(0),
        }
        self.accounting.record(Access {
            kind: AccessKind::Read,
            index,
        });
        Ok(())
    }

    fn write_page(&mut self, index: u64, data: &[u8]) -> Result<()> {
        check_access(index, self.page_count(), data.len(), self.page_size)?;
        match &mut self.pages[index as usize] {
            Some(page) => page.copy_from_slice(data),
            slot @ None => *slot = Some(data.into()),
        }
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
