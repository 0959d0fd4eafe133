use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use amq_core::store::DEFAULT_PAGE_SIZE;
use amq_core::{CascadeConfig, LoadFactor, QfGeometry};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Qf,
    Bf,
    Bqf,
    Cf,
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::Qf => "qf",
            Structure::Bf => "bf",
            Structure::Bqf => "bqf",
            Structure::Cf => "cf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreSpec {
    Sim,
    File(PathBuf),
}

impl FromStr for StoreSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sim" => Ok(StoreSpec::Sim),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(StoreSpec::File(PathBuf::from(path))),
                _ => Err(format!("expected `sim` or `file:PATH`, got `{s}`")),
            },
        }
    }
}

/// Everything a run needs. Structure parameters that a structure does not
/// use are ignored; `None` means "derive from the insert count".
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub structure: Structure,
    pub inserts: u64,
    /// Quotient bits of a plain filter, or of the BQF disk filter.
    pub q: Option<u32>,
    /// Remainder bits of a plain filter.
    pub r: u32,
    /// Fingerprint width of the BQF and CF.
    pub p: u32,
    pub fanout: u32,
    pub buffer_slots: u64,
    pub max_load: LoadFactor,
    pub bits_per_key: u32,
    pub page_size: usize,
    pub seed: u64,
    pub checkpoint_pct: u32,
    pub lookups: u64,
    pub store: StoreSpec,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            structure: Structure::Qf,
            inserts: 100_000,
            q: None,
            r: 12,
            p: 32,
            fanout: 2,
            buffer_slots: 1 << 14,
            max_load: LoadFactor::THREE_QUARTERS,
            bits_per_key: 8,
            page_size: DEFAULT_PAGE_SIZE,
            seed: 1,
            checkpoint_pct: 5,
            lookups: 10_000,
            store: StoreSpec::Sim,
        }
    }
}

/// Concrete sizes derived from a validated config.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Qf(QfGeometry),
    Bf { bits: u64, expected_n: u64 },
    Bqf { ram: QfGeometry, disk: QfGeometry },
    Cf(CascadeConfig),
}

fn smallest_q_holding(n: u64, min_q: u32, max_load: LoadFactor) -> u32 {
    (min_q..64)
        .find(|&q| max_load.capacity(1 << q) >= n)
        .unwrap_or(64)
}

impl WorkloadConfig {
    pub fn checkpoints(&self) -> u32 {
        100 / self.checkpoint_pct
    }

    /// Inserts completed at checkpoint `i` (1-based).
    pub fn inserts_at(&self, i: u32) -> u64 {
        (self.inserts as u128 * i as u128 / self.checkpoints() as u128) as u64
    }

    pub fn plan(&self) -> Result<Plan> {
        if self.inserts == 0 {
            return Err(config_err("--inserts must be at least 1"));
        }
        if self.checkpoint_pct == 0 || 100 % self.checkpoint_pct != 0 {
            return Err(config_err(format!(
                "--checkpoint-pct {} does not divide 100",
                self.checkpoint_pct
            )));
        }
        let g = |q, r| QfGeometry::new(q, r, self.max_load).map_err(|e| config_err(e.to_string()));
        let ram_q = || {
            if self.buffer_slots < 2 || !self.buffer_slots.is_power_of_two() {
                return Err(config_err(format!(
                    "--buffer-slots {} must be a power of two >= 2",
                    self.buffer_slots
                )));
            }
            Ok(self.buffer_slots.trailing_zeros())
        };
        match self.structure {
            Structure::Qf => {
                let geometry = g(self.q.unwrap_or(16), self.r)?;
                if self.inserts > geometry.capacity() {
                    return Err(config_err(format!(
                        "{} inserts exceed the filter's capacity of {}",
                        self.inserts,
                        geometry.capacity()
                    )));
                }
                Ok(Plan::Qf(geometry))
            }
            Structure::Bf => {
                if self.bits_per_key == 0 {
                    return Err(config_err("--bits-per-key must be at least 1"));
                }
                Ok(Plan::Bf {
                    bits: self.inserts * self.bits_per_key as u64,
                    expected_n: self.inserts,
                })
            }
            Structure::Bqf => {
                let rq = ram_q()?;
                let dq = self
                    .q
                    .unwrap_or_else(|| smallest_q_holding(self.inserts, rq, self.max_load));
                if dq >= self.p || rq >= self.p {
                    return Err(config_err(format!(
                        "p={} leaves no remainder bits for a disk filter of q={dq}",
                        self.p
                    )));
                }
                let disk = g(dq, self.p - dq)?;
                if self.inserts > disk.capacity() {
                    return Err(config_err(format!(
                        "{} inserts exceed the disk filter's capacity of {}",
                        self.inserts,
                        disk.capacity()
                    )));
                }
                Ok(Plan::Bqf {
                    ram: g(rq, self.p - rq)?,
                    disk,
                })
            }
            Structure::Cf => {
                let q0 = ram_q()?;
                if self.fanout < 2 || !self.fanout.is_power_of_two() {
                    return Err(config_err(format!(
                        "--fanout {} must be a power of two >= 2",
                        self.fanout
                    )));
                }
                let step = self.fanout.trailing_zeros();
                // Deep enough that the last level alone holds every insert,
                // so the merge policy always finds a home.
                let deepest = smallest_q_holding(self.inserts, q0, self.max_load);
                let levels = ((deepest - q0).div_ceil(step)).max(1);
                let config = CascadeConfig {
                    q0,
                    width: self.p,
                    fanout: self.fanout,
                    max_levels: levels,
                    max_load: self.max_load,
                };
                config.validate().map_err(|e| config_err(e.to_string()))?;
                Ok(Plan::Cf(config))
            }
        }
    }
}
