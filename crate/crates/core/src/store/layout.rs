//! On-store quotient filter format.
//!
//! ```text
//! page base      header: "AMQQFV01" | q u8 | r u8 | load num u8 | load den u8
//!                        | count u64 LE | 12 zero bytes, rest of page zero
//! page base+1..  packed slot array (LSB-first), zero-padded to whole pages
//! ```

use super::{check_page_size, PageStore};
use crate::error::{Error, Result};
use crate::qf::{LoadFactor, QfGeometry, QuotientFilter, SlotArray};

pub const QF_MAGIC: &[u8; 8] = b"AMQQFV01";
pub const QF_HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnDiskQfHeader {
    pub q: u8,
    pub r: u8,
    pub max_load_num: u8,
    pub max_load_den: u8,
    pub count: u64,
}

impl OnDiskQfHeader {
    pub fn for_filter(qf: &QuotientFilter) -> Self {
        let g = qf.geometry();
        Self {
            q: g.quotient_bits() as u8,
            r: g.remainder_bits() as u8,
            max_load_num: g.max_load().num(),
            max_load_den: g.max_load().den(),
            count: qf.count(),
        }
    }

    pub fn geometry(&self) -> Result<QfGeometry> {
        let load = LoadFactor::new(self.max_load_num, self.max_load_den)
            .map_err(|e| Error::CorruptEncoding(format!("header load factor: {e}")))?;
        QfGeometry::new(self.q as u32, self.r as u32, load)
            .map_err(|e| Error::CorruptEncoding(format!("header geometry: {e}")))
    }

    pub fn encode(&self) -> [u8; QF_HEADER_LEN] {
        let mut out = [0u8; QF_HEADER_LEN];
        out[..8].copy_from_slice(QF_MAGIC);
        out[8] = self.q;
        out[9] = self.r;
        out[10] = self.max_load_num;
        out[11] = self.max_load_den;
        out[12..20].copy_from_slice(&self.count.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < QF_HEADER_LEN || &bytes[..8] != QF_MAGIC {
            return Err(Error::CorruptEncoding("missing AMQQFV01 header".into()));
        }
        let header = Self {
            q: bytes[8],
            r: bytes[9],
            max_load_num: bytes[10],
            max_load_den: bytes[11],
            count: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
        };
        header.geometry()?;
        Ok(header)
    }
}

/// A contiguous range of pages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageSpan {
    pub base: u64,
    pub pages: u64,
}

impl PageSpan {
    pub fn end(&self) -> u64 {
        self.base + self.pages
    }
}

/// Header page plus the data pages for a filter of this shape.
pub fn serialized_pages(geometry: QfGeometry, page_size: usize) -> u64 {
    let bytes = (geometry.slots() * geometry.slot_bits() as u64).div_ceil(8);
    1 + bytes.div_ceil(page_size as u64)
}

fn check_span<S: PageStore + ?Sized>(store: &S, base: u64, pages: u64) -> Result<()> {
    let end = base + pages;
    if end > store.page_count() {
        return Err(Error::OutOfRange {
            index: end - 1,
            page_count: store.page_count(),
        });
    }
    Ok(())
}

/// Writes `qf` at page `base`, header first, with strictly ascending page writes.
pub fn serialize_qf<S: PageStore + ?Sized>(
    qf: &QuotientFilter,
    store: &mut S,
    base: u64,
) -> Result<PageSpan> {
    let page_size = store.page_size();
    check_page_size(page_size)?;
    let pages = serialized_pages(qf.geometry(), page_size);
    check_span(store, base, pages)?;

    let mut page = vec![0u8; page_size];
    page[..QF_HEADER_LEN].copy_from_slice(&OnDiskQfHeader::for_filter(qf).encode());
    store.write_page(base, &page)?;

    let bytes = qf.slots().to_bytes();
    for (i, chunk) in (0..pages - 1).zip(bytes.chunks(page_size).chain(std::iter::repeat(&[][..])))
    {
        page[..chunk.len()].copy_from_slice(chunk);
        page[chunk.len()..].fill(0);
        store.write_page(base + 1 + i, &page)?;
    }
    Ok(PageSpan { base, pages })
}

pub fn read_qf_header<S: PageStore + ?Sized>(store: &mut S, base: u64) -> Result<OnDiskQfHeader> {
    let mut page = vec![0u8; store.page_size()];
    store.read_page(base, &mut page)?;
    OnDiskQfHeader::decode(&page)
}

/// Reads a filter written by [`serialize_qf`], scanning its pages in order.
pub fn deserialize_qf<S: PageStore + ?Sized>(store: &mut S, base: u64) -> Result<QuotientFilter> {
    let header = read_qf_header(store, base)?;
    let geometry = header.geometry()?;
    let page_size = store.page_size();
    let pages = serialized_pages(geometry, page_size);
    check_span(store, base, pages)?;

    let mut bytes = vec![0u8; ((pages - 1) as usize) * page_size];
    for (i, chunk) in bytes.chunks_mut(page_size).enumerate() {
        store.read_page(base + 1 + i as u64, chunk)?;
    }
    let slots = SlotArray::from_bytes(geometry.slots(), geometry.remainder_bits(), &bytes);
    QuotientFilter::from_raw_parts(geometry, slots, header.count)
}
