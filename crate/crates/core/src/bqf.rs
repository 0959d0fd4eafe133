//! Buffered quotient filter: an in-memory filter absorbs inserts and is
//! merged into one large on-store filter whenever it fills.
//!
//! Store layout:
//!
//! ```text
//! page 0           superblock: "AMQBQFV1" | generation u64 LE | live region u8 (0 none, 1 A, 2 B)
//!                  | ram q, r u8 | disk q, r u8 | load num, den u8
//! region A, B      serialized quotient filters (see `store::serialize_qf`), S pages each
//! ```
//!
//! A flush reads the live region front to back, merges it with the buffer,
//! writes the result front to back into the other region, then updates the
//! superblock. Lookups and flushes must not run concurrently.

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::qf::{LoadFactor, QfGeometry, QuotientFilter};
use crate::store::{
    deserialize_qf, disk_qf_delete, disk_qf_lookup, read_qf_header, serialize_qf, serialized_pages,
    IoCounters, OnDiskQfHeader, PageStore,
};

const SUPERBLOCK_MAGIC: &[u8; 8] = b"AMQBQFV1";

pub struct BufferedQuotientFilter<S> {
    ram: QuotientFilter,
    disk_geometry: QfGeometry,
    store: S,
    region_pages: u64,
    live: Option<usize>,
    disk_header: Option<OnDiskQfHeader>,
    generation: u64,
    flushes: u64,
}

impl<S: PageStore> BufferedQuotientFilter<S> {
    /// Pages a store needs: the superblock plus two disk-filter regions.
    pub fn required_pages(disk_geometry: QfGeometry, page_size: usize) -> u64 {
        1 + 2 * serialized_pages(disk_geometry, page_size)
    }

    pub fn new(ram_geometry: QfGeometry, disk_geometry: QfGeometry, store: S) -> Result<Self> {
        if ram_geometry.width() != disk_geometry.width() {
            return Err(Error::WidthMismatch {
                expected: disk_geometry.width(),
                got: ram_geometry.width(),
            });
        }
        if ram_geometry.capacity() == 0 {
            return Err(Error::InvalidGeometry("buffer holds no elements".into()));
        }
        let required = Self::required_pages(disk_geometry, store.page_size());
        if store.page_count() < required {
            return Err(Error::InvalidGeometry(format!(
                "store has {} pages, buffered filter needs {required}",
                store.page_count()
            )));
        }
        Ok(Self {
            ram: QuotientFilter::with_geometry(ram_geometry),
            region_pages: serialized_pages(disk_geometry, store.page_size()),
            disk_geometry,
            store,
            live: None,
            disk_header: None,
            generation: 0,
            flushes: 0,
        })
    }

    /// Reattaches to a store written by a previous instance. The buffer
    /// starts empty; unflushed elements of the previous instance are gone.
    pub fn open(mut store: S) -> Result<Self> {
        let mut page = vec![0u8; store.page_size()];
        store.read_page(0, &mut page)?;
        if &page[..8] != SUPERBLOCK_MAGIC {
            return Err(Error::CorruptEncoding("missing AMQBQFV1 superblock".into()));
        }
        let generation = u64::from_le_bytes(page[8..16].try_into().unwrap());
        let live = match page[16] {
            0 => None,
            1 => Some(0),
            2 => Some(1),
            x => return Err(Error::CorruptEncoding(format!("live region tag {x}"))),
        };
        let load = LoadFactor::new(page[21], page[22])
            .map_err(|e| Error::CorruptEncoding(e.to_string()))?;
        let ram_g = QfGeometry::new(page[17] as u32, page[18] as u32, load)
            .map_err(|e| Error::CorruptEncoding(e.to_string()))?;
        let disk_g = QfGeometry::new(page[19] as u32, page[20] as u32, load)
            .map_err(|e| Error::CorruptEncoding(e.to_string()))?;
        let mut bqf = Self::new(ram_g, disk_g, store)?;
        bqf.generation = generation;
        bqf.live = live;
        if let Some(region) = live {
            let base = bqf.region_base(region);
            let header = read_qf_header(&mut bqf.store, base)?;
            if header.geometry()? != disk_g {
                return Err(Error::CorruptEncoding(
                    "disk filter geometry disagrees with superblock".into(),
                ));
            }
            bqf.disk_header = Some(header);
        }
        Ok(bqf)
    }

    fn region_base(&self, region: usize) -> u64 {
        1 + region as u64 * self.region_pages
    }

    fn check_width(&self, f: Fingerprint) -> Result<()> {
        if f.width() != self.disk_geometry.width() {
            return Err(Error::WidthMismatch {
                expected: self.disk_geometry.width(),
                got: f.width(),
            });
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.disk_geometry.width()
    }

    pub fn ram(&self) -> &QuotientFilter {
        &self.ram
    }

    pub fn disk_geometry(&self) -> QfGeometry {
        self.disk_geometry
    }

    pub fn disk_count(&self) -> u64 {
        self.disk_header.map_or(0, |h| h.count)
    }

    pub fn count(&self) -> u64 {
        self.disk_count() + self.ram.count()
    }

    pub fn capacity(&self) -> u64 {
        self.disk_geometry.capacity()
    }

    /// Pages occupied by one serialized disk filter, header included.
    pub fn region_pages(&self) -> u64 {
        self.region_pages
    }

    pub fn flushes(&self) -> u64 {
        self.flushes
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn counters(&self) -> IoCounters {
        self.store.counters()
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_store(self) -> S {
        self.store
    }

    /// Inserts into the buffer; a buffer that reaches its load limit is
    /// flushed immediately, including the element that filled it.
    pub fn insert(&mut self, f: Fingerprint) -> Result<()> {
        self.check_width(f)?;
        if self.count() + 1 > self.capacity() {
            return Err(Error::FilterFull {
                capacity: self.capacity(),
            });
        }
        self.ram.insert(f)?;
        if self.ram.is_full() {
            self.flush()?;
        }
        Ok(())
    }

    /// Merges the buffer into the disk filter. A no-op when the buffer is empty.
    pub fn flush(&mut self) -> Result<()> {
        if self.ram.is_empty() {
            return Ok(());
        }
        let disk = match self.live {
            Some(region) => {
                let base = self.region_base(region);
                deserialize_qf(&mut self.store, base)?
            }
            None => QuotientFilter::with_geometry(self.disk_geometry),
        };
        let merged = QuotientFilter::merge(&[&disk, &self.ram], self.disk_geometry)?;
        let target = self.live.map_or(0, |r| 1 - r);
        let base = self.region_base(target);
        serialize_qf(&merged, &mut self.store, base)?;

        self.generation += 1;
        self.live = Some(target);
        self.disk_header = Some(OnDiskQfHeader::for_filter(&merged));
        self.write_superblock()?;
        self.ram.clear();
        self.flushes += 1;
        Ok(())
    }

    fn write_superblock(&mut self) -> Result<()> {
        let mut page = vec![0u8; self.store.page_size()];
        page[..8].copy_from_slice(SUPERBLOCK_MAGIC);
        page[8..16].copy_from_slice(&self.generation.to_le_bytes());
        page[16] = self.live.map_or(0, |r| r as u8 + 1);
        let ram_g = self.ram.geometry();
        page[17] = ram_g.quotient_bits() as u8;
        page[18] = ram_g.remainder_bits() as u8;
        page[19] = self.disk_geometry.quotient_bits() as u8;
        page[20] = self.disk_geometry.remainder_bits() as u8;
        page[21] = self.disk_geometry.max_load().num();
        page[22] = self.disk_geometry.max_load().den();
        self.store.write_page(0, &page)
    }

    /// Buffer first (no I/O), then the disk filter.
    pub fn may_contain(&mut self, f: Fingerprint) -> Result<bool> {
        self.check_width(f)?;
        if self.ram.may_contain(f)? {
            return Ok(true);
        }
        match (self.live, self.disk_header) {
            (Some(region), Some(header)) => {
                let base = self.region_base(region);
                disk_qf_lookup(&mut self.store, base, &header, f)
            }
            _ => Ok(false),
        }
    }

    /// Deletes from the buffer if the fingerprint is there, otherwise from the
    /// disk filter in place.
    pub fn delete(&mut self, f: Fingerprint) -> Result<()> {
        self.check_width(f)?;
        if self.ram.may_contain(f)? {
            return self.ram.delete(f);
        }
        match (self.live, self.disk_header.as_mut()) {
            (Some(region), Some(header)) => {
                let base = 1 + region as u64 * self.region_pages;
                disk_qf_delete(&mut self.store, base, header, f)
            }
            _ => Err(Error::DeleteAbsent(f.value())),
        }
    }

    /// Reads the whole disk filter into memory.
    pub fn load_disk_filter(&mut self) -> Result<QuotientFilter> {
        match self.live {
            Some(region) => {
                let base = self.region_base(region);
                deserialize_qf(&mut self.store, base)
            }
            None => Ok(QuotientFilter::with_geometry(self.disk_geometry)),
        }
    }
}
