use amq_core::store::{FileStore, IoCounters, PageStore, SimStore};
use amq_core::{
    hash_u64, BloomFilter, BufferedQuotientFilter, CascadeFilter, Fingerprint, QuotientFilter,
};

use crate::config::{Plan, StoreSpec, WorkloadConfig};
use crate::error::{config_err, Result};

/// Seed for hashing keys into fingerprints; fixed so that every structure
/// sees the same fingerprint for a key.
pub const HASH_SEED: u64 = 0;

pub type DynStore = Box<dyn PageStore>;

/// One of the four structures behind a common key-level interface.
pub enum AnyFilter {
    Qf(QuotientFilter),
    Bf(BloomFilter),
    Bqf(BufferedQuotientFilter<DynStore>),
    Cf(CascadeFilter<DynStore>),
}

fn open_store(kind: &StoreSpec, pages: u64, page_size: usize) -> Result<DynStore> {
    Ok(match kind {
        StoreSpec::Sim => Box::new(SimStore::new(pages, page_size)?),
        StoreSpec::File(path) => Box::new(FileStore::create(path, pages, page_size)?),
    })
}

impl AnyFilter {
    pub fn build(config: &WorkloadConfig) -> Result<Self> {
        Ok(match config.plan()? {
            Plan::Qf(g) => AnyFilter::Qf(QuotientFilter::with_geometry(g)),
            Plan::Bf { bits, expected_n } => AnyFilter::Bf(BloomFilter::new(bits, expected_n)?),
            Plan::Bqf { ram, disk } => {
                let pages =
                    BufferedQuotientFilter::<DynStore>::required_pages(disk, config.page_size);
                let store = open_store(&config.store, pages, config.page_size)?;
                AnyFilter::Bqf(BufferedQuotientFilter::new(ram, disk, store)?)
            }
            Plan::Cf(c) => {
                let pages = c
                    .required_pages(config.page_size)
                    .map_err(|e| config_err(e.to_string()))?;
                let store = open_store(&config.store, pages, config.page_size)?;
                AnyFilter::Cf(CascadeFilter::new(c, store)?)
            }
        })
    }

    fn width(&self) -> u32 {
        match self {
            AnyFilter::Qf(f) => f.width(),
            AnyFilter::Bf(_) => 0,
            AnyFilter::Bqf(f) => f.width(),
            AnyFilter::Cf(f) => f.width(),
        }
    }

    fn fingerprint(&self, key: u64) -> Result<Fingerprint> {
        Ok(hash_u64(key, self.width(), HASH_SEED)?)
    }

    pub fn insert(&mut self, key: u64) -> Result<()> {
        if let AnyFilter::Bf(f) = self {
            f.insert(&key.to_le_bytes());
            return Ok(());
        }
        let fp = self.fingerprint(key)?;
        match self {
            AnyFilter::Qf(f) => f.insert(fp)?,
            AnyFilter::Bqf(f) => f.insert(fp)?,
            AnyFilter::Cf(f) => f.insert(fp)?,
            AnyFilter::Bf(_) => unreachable!(),
        }
        Ok(())
    }

    pub fn may_contain(&mut self, key: u64) -> Result<bool> {
        if let AnyFilter::Bf(f) = self {
            return Ok(f.may_contain(&key.to_le_bytes()));
        }
        let fp = self.fingerprint(key)?;
        Ok(match self {
            AnyFilter::Qf(f) => f.may_contain(fp)?,
            AnyFilter::Bqf(f) => f.may_contain(fp)?,
            AnyFilter::Cf(f) => f.may_contain(fp)?,
            AnyFilter::Bf(_) => unreachable!(),
        })
    }

    pub fn counters(&self) -> IoCounters {
        match self {
            AnyFilter::Bqf(f) => f.counters(),
            AnyFilter::Cf(f) => f.counters(),
            _ => IoCounters::default(),
        }
    }

    /// Flushes (BQF) or merges (CF) so far.
    pub fn events(&self) -> u64 {
        match self {
            AnyFilter::Bqf(f) => f.flushes(),
            AnyFilter::Cf(f) => f.merges(),
            _ => 0,
        }
    }

    /// `level:load` pairs joined by `;` for the cascade filter, empty otherwise.
    pub fn level_loads(&self) -> String {
        match self {
            AnyFilter::Cf(f) => f
                .level_info()
                .iter()
                .map(|l| format!("{}:{:.6}", l.level, l.load))
                .collect::<Vec<_>>()
                .join(";"),
            _ => String::new(),
        }
    }

    /// Rough false positive rate implied by the structure's shape with `n` keys.
    pub fn expected_fp_rate(&self, n: u64) -> f64 {
        match self {
            AnyFilter::Bf(f) => amq_core::bloom::expected_fp_rate(f.bits(), n, f.hashes()),
            _ => n as f64 / 2f64.powi(self.width() as i32),
        }
    }
}
