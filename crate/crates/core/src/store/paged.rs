//! Quotient filter operations executed directly against store pages.
//!
//! Pages are fetched on first touch and kept for the duration of a single
//! operation, so a lookup reads exactly the pages its cluster spans.

use super::layout::OnDiskQfHeader;
use super::PageStore;
use crate::error::{Error, Result};
use crate::fingerprint::{low_mask, Fingerprint};
use crate::qf::{ops, QfGeometry, Slot, SlotRead, SlotWrite};

struct CachedPage {
    index: u64,
    bytes: Vec<u8>,
    dirty: bool,
}

/// Slot view over a serialized filter whose header sits at page `base`.
struct PagedSlots<'a, S: ?Sized> {
    store: &'a mut S,
    data_base: u64,
    slot_count: u64,
    slot_bits: u32,
    page_size: usize,
    pages: Vec<CachedPage>,
}

impl<'a, S: PageStore + ?Sized> PagedSlots<'a, S> {
    fn new(store: &'a mut S, base: u64, geometry: QfGeometry) -> Self {
        let page_size = store.page_size();
        Self {
            store,
            data_base: base + 1,
            slot_count: geometry.slots(),
            slot_bits: geometry.slot_bits(),
            page_size,
            pages: Vec::with_capacity(2),
        }
    }

    fn page(&mut self, rel: u64) -> Result<&mut CachedPage> {
        let pos = match self.pages.iter().position(|p| p.index == rel) {
            Some(pos) => pos,
            None => {
                let mut bytes = vec![0u8; self.page_size];
                self.store.read_page(self.data_base + rel, &mut bytes)?;
                self.pages.push(CachedPage {
                    index: rel,
                    bytes,
                    dirty: false,
                });
                self.pages.len() - 1
            }
        };
        Ok(&mut self.pages[pos])
    }

    /// Little-endian value of bytes `[first, first + n)` of the slot area.
    fn load_bytes(&mut self, first: u64, n: usize) -> Result<u128> {
        let mut v = 0u128;
        for k in 0..n {
            let b = first + k as u64;
            let ps = self.page_size as u64;
            let page = self.page(b / ps)?;
            v |= (page.bytes[(b % ps) as usize] as u128) << (8 * k);
        }
        Ok(v)
    }

    fn store_bytes(&mut self, first: u64, n: usize, v: u128) -> Result<()> {
        for k in 0..n {
            let b = first + k as u64;
            let ps = self.page_size as u64;
            let page = self.page(b / ps)?;
            page.bytes[(b % ps) as usize] = (v >> (8 * k)) as u8;
            page.dirty = true;
        }
        Ok(())
    }

    fn span(&self, i: u64) -> (u64, usize, u32) {
        let pos = i * self.slot_bits as u64;
        let first = pos / 8;
        let last = (pos + self.slot_bits as u64 - 1) / 8;
        (first, (last - first + 1) as usize, (pos % 8) as u32)
    }

    /// Writes modified pages back in ascending order.
    fn commit(mut self) -> Result<u64> {
        self.pages.sort_by_key(|p| p.index);
        let mut written = 0;
        for p in self.pages.iter().filter(|p| p.dirty) {
            self.store.write_page(self.data_base + p.index, &p.bytes)?;
            written += 1;
        }
        Ok(written)
    }
}

impl<S: PageStore + ?Sized> SlotRead for PagedSlots<'_, S> {
    fn slot_count(&self) -> u64 {
        self.slot_count
    }

    fn get(&mut self, i: u64) -> Result<Slot> {
        let (first, n, shift) = self.span(i);
        let raw = self.load_bytes(first, n)? >> shift;
        let meta = (raw & 0b111) as u64;
        let remainder = ((raw >> 3) as u64) & low_mask(self.slot_bits - 3);
        Ok(Slot {
            occupied: meta & 1 != 0,
            continuation: meta & 2 != 0,
            shifted: meta & 4 != 0,
            remainder,
        })
    }

    fn occupied(&mut self, i: u64) -> Result<bool> {
        let pos = i * self.slot_bits as u64;
        Ok(self.load_bytes(pos / 8, 1)? >> (pos % 8) & 1 == 1)
    }
}

impl<S: PageStore + ?Sized> SlotWrite for PagedSlots<'_, S> {
    fn set(&mut self, i: u64, slot: Slot) -> Result<()> {
        let (first, n, shift) = self.span(i);
        let width = self.slot_bits;
        let mask: u128 = ((1u128 << width) - 1) << shift;
        let value = (slot.occupied as u128)
            | ((slot.continuation as u128) << 1)
            | ((slot.shifted as u128) << 2)
            | ((slot.remainder as u128) << 3);
        let old = self.load_bytes(first, n)?;
        self.store_bytes(first, n, (old & !mask) | ((value << shift) & mask))
    }
}

fn split(header: &OnDiskQfHeader, f: Fingerprint) -> Result<(QfGeometry, u64, u64)> {
    let g = header.geometry()?;
    if f.width() != g.width() {
        return Err(Error::WidthMismatch {
            expected: g.width(),
            got: f.width(),
        });
    }
    let r = g.remainder_bits();
    Ok((g, f.value() >> r, f.value() & low_mask(r)))
}

/// Membership test against a serialized filter, reading only the pages that
/// the probed cluster spans.
pub fn disk_qf_lookup<S: PageStore + ?Sized>(
    store: &mut S,
    base: u64,
    header: &OnDiskQfHeader,
    f: Fingerprint,
) -> Result<bool> {
    let (g, fq, fr) = split(header, f)?;
    let mut slots = PagedSlots::new(store, base, g);
    ops::contains(&mut slots, fq, fr)
}

/// Removes one copy of `f` from a serialized filter by rewriting the pages of
/// its cluster, then rewrites the header page with the new count.
pub fn disk_qf_delete<S: PageStore + ?Sized>(
    store: &mut S,
    base: u64,
    header: &mut OnDiskQfHeader,
    f: Fingerprint,
) -> Result<()> {
    let (g, fq, fr) = split(header, f)?;
    let mut slots = PagedSlots::new(&mut *store, base, g);
    if !ops::remove(&mut slots, fq, fr)? {
        return Err(Error::DeleteAbsent(f.value()));
    }
    slots.commit()?;
    header.count -= 1;
    let mut page = vec![0u8; store.page_size()];
    page[..super::QF_HEADER_LEN].copy_from_slice(&header.encode());
    store.write_page(base, &page)
}
