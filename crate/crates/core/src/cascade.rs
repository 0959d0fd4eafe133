//! Cascade filter: an in-memory quotient filter `Q0` over on-store levels
//! `Q1..Ql`, level `i` having `b^i` times as many slots as `Q0`.
//!
//! Every level stores fingerprints of the same width `p`; a level with `k`
//! more quotient bits simply has `k` fewer remainder bits, so the whole
//! structure answers exactly like one quotient filter holding every element.
//! When `Q0` fills, the smallest level `i` that can hold the contents of
//! `Q0..Qi` receives all of them in one merge, and the shallower levels are
//! emptied.
//!
//! Store layout:
//!
//! ```text
//! page 0     superblock: "AMQCFV01" | generation u64 LE | q0 u8 | p u8 | log2 fanout u8
//!            | max levels u8 | load num u8 | load den u8 | 2 zero bytes
//!            | per level: live region u8 (0 none, 1 A, 2 B) | count u64 LE
//! then       for each level 1..=max: region A, region B (serialized quotient filters)
//! ```

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::qf::{LoadFactor, QfGeometry, QuotientFilter};
use crate::store::{
    deserialize_qf, disk_qf_delete, disk_qf_lookup, read_qf_header, serialize_qf, serialized_pages,
    IoCounters, OnDiskQfHeader, PageStore,
};

const SUPERBLOCK_MAGIC: &[u8; 8] = b"AMQCFV01";
const SUPERBLOCK_FIXED: usize = 24;
const LEVEL_ENTRY: usize = 9;

/// Shape of a cascade filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeConfig {
    /// Quotient bits of the in-memory level.
    pub q0: u32,
    /// Fingerprint width shared by every level.
    pub width: u32,
    /// Size ratio between consecutive levels; a power of two.
    pub fanout: u32,
    pub max_levels: u32,
    pub max_load: LoadFactor,
}

impl CascadeConfig {
    pub fn fanout_bits(&self) -> u32 {
        self.fanout.trailing_zeros()
    }

    pub fn validate(&self) -> Result<()> {
        if self.fanout < 2 || !self.fanout.is_power_of_two() {
            return Err(Error::InvalidGeometry(format!(
                "fanout {} must be a power of two >= 2",
                self.fanout
            )));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidGeometry(
                "need at least one on-store level".into(),
            ));
        }
        let deepest_q = self.q0 as u64 + self.max_levels as u64 * self.fanout_bits() as u64;
        if deepest_q >= self.width as u64 {
            return Err(Error::InvalidGeometry(format!(
                "deepest level would have {} remainder bits (p={}, q0={}, {} levels of fanout {})",
                self.width as i64 - deepest_q as i64,
                self.width,
                self.q0,
                self.max_levels,
                self.fanout
            )));
        }
        for level in 0..=self.max_levels {
            self.level_geometry(level)?;
        }
        if self.level_geometry(0)?.capacity() == 0 {
            return Err(Error::InvalidGeometry(
                "in-memory level holds no elements".into(),
            ));
        }
        Ok(())
    }

    pub fn level_geometry(&self, level: u32) -> Result<QfGeometry> {
        let q = self.q0 + level * self.fanout_bits();
        if q >= self.width {
            return Err(Error::InvalidGeometry(format!(
                "level {level} leaves no remainder bits"
            )));
        }
        QfGeometry::new(q, self.width - q, self.max_load)
    }

    /// Pages a store needs: the superblock plus two regions per on-store level.
    pub fn required_pages(&self, page_size: usize) -> Result<u64> {
        let mut pages = 1;
        for level in 1..=self.max_levels {
            pages += 2 * serialized_pages(self.level_geometry(level)?, page_size);
        }
        Ok(pages)
    }
}

/// Diagnostics for one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelInfo {
    pub level: u32,
    pub slots: u64,
    pub count: u64,
    pub load: f64,
    /// Serialized size in pages; zero for the in-memory level.
    pub pages: u64,
}

#[derive(Debug, Clone)]
struct Level {
    geometry: QfGeometry,
    bases: [u64; 2],
    pages: u64,
    live: Option<usize>,
    header: Option<OnDiskQfHeader>,
}

impl Level {
    fn count(&self) -> u64 {
        self.header.map_or(0, |h| h.count)
    }

    fn live_base(&self) -> Option<(u64, OnDiskQfHeader)> {
        Some((self.bases[self.live?], self.header?))
    }
}

pub struct CascadeFilter<S> {
    config: CascadeConfig,
    q0: QuotientFilter,
    levels: Vec<Level>,
    store: S,
    generation: u64,
    merges: u64,
}

impl<S: PageStore> CascadeFilter<S> {
    pub fn new(config: CascadeConfig, store: S) -> Result<Self> {
        config.validate()?;
        let page_size = store.page_size();
        let max = (page_size - SUPERBLOCK_FIXED) / LEVEL_ENTRY;
        if config.max_levels as usize > max {
            return Err(Error::InvalidGeometry(format!(
                "{} levels do not fit in a {page_size}-byte superblock",
                config.max_levels
            )));
        }
        let required = config.required_pages(page_size)?;
        if store.page_count() < required {
            return Err(Error::InvalidGeometry(format!(
                "store has {} pages, cascade filter needs {required}",
                store.page_count()
            )));
        }
        let mut levels = Vec::with_capacity(config.max_levels as usize);
        let mut next = 1;
        for level in 1..=config.max_levels {
            let geometry = config.level_geometry(level)?;
            let pages = serialized_pages(geometry, page_size);
            levels.push(Level {
                geometry,
                bases: [next, next + pages],
                pages,
                live: None,
                header: None,
            });
            next += 2 * pages;
        }
        Ok(Self {
            q0: QuotientFilter::with_geometry(config.level_geometry(0)?),
            config,
            levels,
            store,
            generation: 0,
            merges: 0,
        })
    }

    /// Reattaches to a store written by a previous instance, with `Q0` empty.
    pub fn open(mut store: S) -> Result<Self> {
        let mut page = vec![0u8; store.page_size()];
        store.read_page(0, &mut page)?;
        if &page[..8] != SUPERBLOCK_MAGIC {
            return Err(Error::CorruptEncoding("missing AMQCFV01 superblock".into()));
        }
        let corrupt = |e: Error| Error::CorruptEncoding(e.to_string());
        let config = CascadeConfig {
            q0: page[16] as u32,
            width: page[17] as u32,
            fanout: 1u32.checked_shl(page[18] as u32).unwrap_or(0),
            max_levels: page[19] as u32,
            max_load: LoadFactor::new(page[20], page[21]).map_err(corrupt)?,
        };
        let mut cf = Self::new(config, store).map_err(corrupt)?;
        cf.generation = u64::from_le_bytes(page[8..16].try_into().unwrap());
        for i in 0..cf.levels.len() {
            let at = SUPERBLOCK_FIXED + i * LEVEL_ENTRY;
            let live = match page[at] {
                0 => continue,
                tag @ (1 | 2) => tag as usize - 1,
                x => {
                    return Err(Error::CorruptEncoding(format!(
                        "level {} region tag {x}",
                        i + 1
                    )))
                }
            };
            let header = read_qf_header(&mut cf.store, cf.levels[i].bases[live])?;
            if header.geometry()? != cf.levels[i].geometry {
                return Err(Error::CorruptEncoding(format!(
                    "level {} geometry disagrees with superblock",
                    i + 1
                )));
            }
            cf.levels[i].live = Some(live);
            cf.levels[i].header = Some(header);
        }
        Ok(cf)
    }

    pub fn config(&self) -> CascadeConfig {
        self.config
    }

    pub fn width(&self) -> u32 {
        self.config.width
    }

    pub fn count(&self) -> u64 {
        self.q0.count() + self.levels.iter().map(Level::count).sum::<u64>()
    }

    /// Upper bound on the elements held: every level at its load limit.
    pub fn capacity(&self) -> u64 {
        self.q0.capacity()
            + self
                .levels
                .iter()
                .map(|l| l.geometry.capacity())
                .sum::<u64>()
    }

    pub fn merges(&self) -> u64 {
        self.merges
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

    pub fn ram(&self) -> &QuotientFilter {
        &self.q0
    }

    /// On-store levels currently holding at least one element.
    pub fn nonempty_levels(&self) -> usize {
        self.levels.iter().filter(|l| l.count() > 0).count()
    }

    fn check_width(&self, f: Fingerprint) -> Result<()> {
        if f.width() != self.config.width {
            return Err(Error::WidthMismatch {
                expected: self.config.width,
                got: f.width(),
            });
        }
        Ok(())
    }

    /// Smallest level `i >= 1` whose capacity covers `Q0..Qi`, given `q0_count`
    /// elements in memory.
    fn merge_target(&self, q0_count: u64) -> Option<usize> {
        let mut total = q0_count;
        for (i, level) in self.levels.iter().enumerate() {
            total += level.count();
            if total <= level.geometry.capacity() {
                return Some(i);
            }
        }
        None
    }

    pub fn insert(&mut self, f: Fingerprint) -> Result<()> {
        self.check_width(f)?;
        let fills_q0 = self.q0.count() + 1 >= self.q0.capacity();
        if fills_q0 && self.merge_target(self.q0.count() + 1).is_none() {
            return Err(Error::FilterFull {
                capacity: self.capacity(),
            });
        }
        self.q0.insert(f)?;
        if self.q0.is_full() {
            let target = self
                .merge_target(self.q0.count())
                .expect("merge target checked before insert");
            self.merge_into(target)?;
        }
        Ok(())
    }

    /// Merges `Q0` and levels `1..=target+1` into a fresh copy of level `target+1`.
    fn merge_into(&mut self, target: usize) -> Result<()> {
        let mut inputs = Vec::with_capacity(target + 1);
        for level in &self.levels[..=target] {
            if let Some((base, _)) = level.live_base() {
                inputs.push(deserialize_qf(&mut self.store, base)?);
            }
        }
        let mut refs: Vec<&QuotientFilter> = vec![&self.q0];
        refs.extend(inputs.iter());
        let merged = QuotientFilter::merge(&refs, self.levels[target].geometry)?;
        drop(inputs);

        let region = self.levels[target].live.map_or(0, |r| 1 - r);
        let base = self.levels[target].bases[region];
        serialize_qf(&merged, &mut self.store, base)?;

        for level in &mut self.levels[..target] {
            level.live = None;
            level.header = None;
        }
        let t = &mut self.levels[target];
        t.live = Some(region);
        t.header = Some(OnDiskQfHeader::for_filter(&merged));
        self.generation += 1;
        self.write_superblock()?;
        self.q0.clear();
        self.merges += 1;
        Ok(())
    }

    fn write_superblock(&mut self) -> Result<()> {
        let mut page = vec![0u8; self.store.page_size()];
        page[..8].copy_from_slice(SUPERBLOCK_MAGIC);
        page[8..16].copy_from_slice(&self.generation.to_le_bytes());
        page[16] = self.config.q0 as u8;
        page[17] = self.config.width as u8;
        page[18] = self.config.fanout_bits() as u8;
        page[19] = self.config.max_levels as u8;
        page[20] = self.config.max_load.num();
        page[21] = self.config.max_load.den();
        for (i, level) in self.levels.iter().enumerate() {
            let at = SUPERBLOCK_FIXED + i * LEVEL_ENTRY;
            page[at] = level.live.map_or(0, |r| r as u8 + 1);
            page[at + 1..at + 9].copy_from_slice(&level.count().to_le_bytes());
        }
        self.store.write_page(0, &page)
    }

    /// `Q0` first, then each non-empty level from shallow to deep.
    pub fn may_contain(&mut self, f: Fingerprint) -> Result<bool> {
        self.check_width(f)?;
        if self.q0.may_contain(f)? {
            return Ok(true);
        }
        for level in &self.levels {
            if level.count() == 0 {
                continue;
            }
            if let Some((base, header)) = level.live_base() {
                if disk_qf_lookup(&mut self.store, base, &header, f)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Removes one copy of `f` from the shallowest level that holds it.
    pub fn delete(&mut self, f: Fingerprint) -> Result<()> {
        self.check_width(f)?;
        if self.q0.may_contain(f)? {
            return self.q0.delete(f);
        }
        for level in &mut self.levels {
            if level.count() == 0 {
                continue;
            }
            let (Some(region), Some(header)) = (level.live, level.header.as_mut()) else {
                continue;
            };
            match disk_qf_delete(&mut self.store, level.bases[region], header, f) {
                Ok(()) => return Ok(()),
                Err(Error::DeleteAbsent(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DeleteAbsent(f.value()))
    }

    /// Level 0 plus every on-store level that currently has a live filter.
    pub fn level_info(&self) -> Vec<LevelInfo> {
        let mut out = vec![LevelInfo {
            level: 0,
            slots: self.q0.geometry().slots(),
            count: self.q0.count(),
            load: self.q0.load(),
            pages: 0,
        }];
        for (i, level) in self.levels.iter().enumerate() {
            if level.live.is_none() {
                continue;
            }
            let slots = level.geometry.slots();
            out.push(LevelInfo {
                level: i as u32 + 1,
                slots,
                count: level.count(),
                load: level.count() as f64 / slots as f64,
                pages: level.pages,
            });
        }
        out
    }

    /// Reads one on-store level into memory; `None` if it has no live filter.
    pub fn load_level(&mut self, level: u32) -> Result<Option<QuotientFilter>> {
        let Some(l) = level
            .checked_sub(1)
            .and_then(|i| self.levels.get(i as usize))
        else {
            return Err(Error::InvalidGeometry(format!("no on-store level {level}")));
        };
        match l.live_base() {
            Some((base, _)) => deserialize_qf(&mut self.store, base).map(Some),
            None => Ok(None),
        }
    }
}
