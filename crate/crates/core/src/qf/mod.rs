//! In-memory quotient filter.
//!
//! A quotient filter stores a multiset of `p`-bit fingerprints in `2^q` slots
//! of `r + 3` bits, `p = q + r`. The quotient selects a home bucket; remainders
//! sharing a quotient form a sorted *run*, and runs that collide are shifted
//! right into a *cluster*. Three metadata bits per slot make the layout fully
//! decodable, which gives ordered iteration, merging and resizing without
//! rehashing.
//!
//! Remainders are kept sorted within each run, so the slot array is a
//! canonical function of the stored multiset: two filters holding the same
//! fingerprints compare equal bit for bit regardless of operation history.

mod iter;
pub(crate) mod ops;
mod slots;

use std::collections::BTreeMap;
use std::fmt;

pub use iter::OrderedIter;
pub use slots::{Slot, SlotArray};
pub(crate) use slots::{SlotRead, SlotWrite};

use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, MAX_WIDTH};

/// Largest quotient width accepted; keeps the slot array addressable in memory.
pub const MAX_QUOTIENT_BITS: u32 = 40;

/// Maximum load expressed as a fraction `num / den` with `0 < num < den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoadFactor {
    num: u8,
    den: u8,
}

impl LoadFactor {
    pub const THREE_QUARTERS: LoadFactor = LoadFactor { num: 3, den: 4 };

    pub fn new(num: u8, den: u8) -> Result<Self> {
        if num == 0 || num >= den {
            return Err(Error::InvalidGeometry(format!(
                "max load {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        Ok(Self { num, den })
    }

    /// Closest fraction with a denominator below 256.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "max load {x} must lie strictly between 0 and 1"
            )));
        }
        let mut best = (f64::INFINITY, 0u8, 1u8);
        for den in 2..=255u8 {
            let num = (x * den as f64).round();
            if num < 1.0 || num >= den as f64 {
                continue;
            }
            let err = (num / den as f64 - x).abs();
            if err + 1e-12 < best.0 {
                best = (err, num as u8, den);
            }
        }
        Self::new(best.1, best.2)
    }

    pub fn num(&self) -> u8 {
        self.num
    }

    pub fn den(&self) -> u8 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `floor(slots * num / den)`.
    pub fn capacity(&self, slots: u64) -> u64 {
        ((slots as u128 * self.num as u128) / self.den as u128) as u64
    }
}

impl Default for LoadFactor {
    fn default() -> Self {
        Self::THREE_QUARTERS
    }
}

impl fmt::Display for LoadFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Shape of a quotient filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QfGeometry {
    q: u32,
    r: u32,
    max_load: LoadFactor,
}

impl QfGeometry {
    pub fn new(q: u32, r: u32, max_load: LoadFactor) -> Result<Self> {
        if q == 0 || r == 0 {
            return Err(Error::InvalidGeometry(format!(
                "quotient and remainder widths must be positive (q={q}, r={r})"
            )));
        }
        if q + r > MAX_WIDTH {
            return Err(Error::InvalidGeometry(format!(
                "q + r = {} exceeds {MAX_WIDTH}",
                q + r
            )));
        }
        if q > MAX_QUOTIENT_BITS {
            return Err(Error::InvalidGeometry(format!(
                "q = {q} exceeds {MAX_QUOTIENT_BITS}"
            )));
        }
        Ok(Self { q, r, max_load })
    }

    pub fn quotient_bits(&self) -> u32 {
        self.q
    }

    pub fn remainder_bits(&self) -> u32 {
        self.r
    }

    /// Fingerprint width `p = q + r`.
    pub fn width(&self) -> u32 {
        self.q + self.r
    }

    pub fn slots(&self) -> u64 {
        1u64 << self.q
    }

    pub fn slot_bits(&self) -> u32 {
        self.r + slots::META_BITS
    }

    pub fn max_load(&self) -> LoadFactor {
        self.max_load
    }

    /// Largest element count the filter accepts.
    pub fn capacity(&self) -> u64 {
        self.max_load.capacity(self.slots())
    }

    /// Same fingerprint width with one quotient bit more (`delta = 1`) or less (`-1`).
    pub fn reshaped(&self, delta: i32) -> Result<Self> {
        let q = self.q as i64 + delta as i64;
        let r = self.r as i64 - delta as i64;
        if q < 1 || r < 1 {
            return Err(Error::InvalidGeometry(format!(
                "cannot move {delta} bits between quotient {} and remainder {}",
                self.q, self.r
            )));
        }
        Self::new(q as u32, r as u32, self.max_load)
    }
}

/// Cluster-length summary. A cluster is a maximal stretch of non-empty slots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterStats {
    pub count: u64,
    pub mean_len: f64,
    /// Mean length of the cluster holding a uniformly chosen stored element.
    pub element_weighted_mean_len: f64,
    pub max_len: u64,
    pub histogram: BTreeMap<u64, u64>,
}

impl ClusterStats {
    /// Smallest length `L` such that at least `pct` percent of clusters have length `<= L`.
    pub fn percentile(&self, pct: f64) -> u64 {
        if self.count == 0 {
            return 0;
        }
        let target = (pct / 100.0 * self.count as f64).ceil() as u64;
        let mut seen = 0;
        for (&len, &n) in &self.histogram {
            seen += n;
            if seen >= target {
                return len;
            }
        }
        self.max_len
    }
}

/// A quotient filter held in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientFilter {
    geometry: QfGeometry,
    slots: SlotArray,
    count: u64,
}

impl QuotientFilter {
    pub fn new(q: u32, r: u32, max_load: LoadFactor) -> Result<Self> {
        Ok(Self::with_geometry(QfGeometry::new(q, r, max_load)?))
    }

    pub fn with_geometry(geometry: QfGeometry) -> Self {
        Self {
            slots: SlotArray::new(geometry.slots(), geometry.remainder_bits()),
            geometry,
            count: 0,
        }
    }

    /// Reassembles a filter from its packed parts without validation; use
    /// [`QuotientFilter::decode`] to check consistency.
    pub fn from_raw_parts(geometry: QfGeometry, slots: SlotArray, count: u64) -> Result<Self> {
        if slots.len() != geometry.slots() || slots.remainder_bits() != geometry.remainder_bits() {
            return Err(Error::InvalidGeometry(
                "slot array does not match geometry".into(),
            ));
        }
        Ok(Self {
            geometry,
            slots,
            count,
        })
    }

    pub fn geometry(&self) -> QfGeometry {
        self.geometry
    }

    pub fn width(&self) -> u32 {
        self.geometry.width()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn capacity(&self) -> u64 {
        self.geometry.capacity()
    }

    pub fn is_full(&self) -> bool {
        self.count >= self.capacity()
    }

    pub fn load(&self) -> f64 {
        self.count as f64 / self.geometry.slots() as f64
    }

    pub fn slots(&self) -> &SlotArray {
        &self.slots
    }

    pub fn slot(&self, i: u64) -> Slot {
        self.slots.get(i)
    }

    #[inline]
    fn parts(&self, f: Fingerprint) -> Result<(u64, u64)> {
        if f.width() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                got: f.width(),
            });
        }
        let r = self.geometry.r;
        Ok((f.value() >> r, f.value() & ((1u64 << r) - 1)))
    }

    pub fn may_contain(&self, f: Fingerprint) -> Result<bool> {
        let (fq, fr) = self.parts(f)?;
        ops::contains(&mut &self.slots, fq, fr)
    }

    pub fn insert(&mut self, f: Fingerprint) -> Result<()> {
        let (fq, fr) = self.parts(f)?;
        if self.is_full() {
            return Err(Error::FilterFull {
                capacity: self.capacity(),
            });
        }
        ops::insert(&mut self.slots, fq, fr)?;
        self.count += 1;
        Ok(())
    }

    /// Removes one copy of `f`. Deleting a fingerprint that is not stored is an
    /// error; a colliding fingerprint from a different key counts as stored.
    pub fn delete(&mut self, f: Fingerprint) -> Result<()> {
        let (fq, fr) = self.parts(f)?;
        if !ops::remove(&mut self.slots, fq, fr)? {
            return Err(Error::DeleteAbsent(f.value()));
        }
        self.count -= 1;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.count = 0;
    }

    /// Stored fingerprints in ascending order, duplicates included.
    pub fn iter_ordered(&self) -> OrderedIter<'_> {
        OrderedIter::new(self)
    }

    /// Builds a filter from fingerprints given in ascending order. Slots are
    /// written left to right; the few fingerprints that would run past the
    /// last slot wrap around through the ordinary insert path.
    pub fn from_sorted<I>(geometry: QfGeometry, fingerprints: I) -> Result<Self>
    where
        I: IntoIterator<Item = Fingerprint>,
    {
        let mut qf = Self::with_geometry(geometry);
        let m = geometry.slots();
        let r = geometry.r;
        let capacity = geometry.capacity();
        let mut next_free = 0u64;
        let mut prev: Option<u64> = None;
        let mut last_fq: Option<u64> = None;
        let mut wrapped = Vec::new();

        for f in fingerprints {
            if f.width() != geometry.width() {
                return Err(Error::WidthMismatch {
                    expected: geometry.width(),
                    got: f.width(),
                });
            }
            if let Some(p) = prev {
                if f.value() < p {
                    return Err(Error::InvalidGeometry(
                        "fingerprints passed to from_sorted are not ascending".into(),
                    ));
                }
            }
            prev = Some(f.value());
            if qf.count + wrapped.len() as u64 >= capacity {
                return Err(Error::FilterFull { capacity });
            }
            let fq = f.value() >> r;
            let fr = f.value() & ((1u64 << r) - 1);
            if !wrapped.is_empty() {
                wrapped.push(f);
                continue;
            }
            let same_run = last_fq == Some(fq);
            let slot = if same_run {
                next_free
            } else {
                fq.max(next_free)
            };
            if slot >= m {
                wrapped.push(f);
                continue;
            }
            if !same_run {
                let home = qf.slots.get(fq);
                qf.slots.set(
                    fq,
                    Slot {
                        occupied: true,
                        ..home
                    },
                );
            }
            let occupied = qf.slots.get(slot).occupied;
            qf.slots.set(
                slot,
                Slot {
                    occupied,
                    continuation: same_run,
                    shifted: slot != fq,
                    remainder: fr,
                },
            );
            next_free = slot + 1;
            last_fq = Some(fq);
            qf.count += 1;
        }

        for f in wrapped {
            qf.insert(f)?;
        }
        Ok(qf)
    }

    /// Multiset union of `inputs`, re-split at `out` geometry. All inputs and
    /// the output must share one fingerprint width.
    pub fn merge(inputs: &[&QuotientFilter], out: QfGeometry) -> Result<Self> {
        let mut total = 0u64;
        for qf in inputs {
            if qf.width() != out.width() {
                return Err(Error::WidthMismatch {
                    expected: out.width(),
                    got: qf.width(),
                });
            }
            total += qf.count;
        }
        if total > out.capacity() {
            return Err(Error::FilterFull {
                capacity: out.capacity(),
            });
        }
        Self::from_sorted(out, merge_sorted(inputs.iter().map(|qf| qf.iter_ordered())))
    }

    /// Moves one bit from the remainder into the quotient: twice the slots,
    /// same fingerprints.
    pub fn resize_double(&self) -> Result<Self> {
        if self.geometry.r < 2 {
            return Err(Error::RemainderExhausted);
        }
        let g = self.geometry.reshaped(1)?;
        if self.count > g.capacity() {
            return Err(Error::FilterFull {
                capacity: g.capacity(),
            });
        }
        Self::from_sorted(g, self.iter_ordered())
    }

    /// Moves one bit from the quotient into the remainder: half the slots.
    pub fn resize_halve(&self) -> Result<Self> {
        if self.geometry.q < 2 {
            return Err(Error::InvalidGeometry(
                "cannot halve a filter with a single quotient bit".into(),
            ));
        }
        let g = self.geometry.reshaped(-1)?;
        if self.count > g.capacity() {
            return Err(Error::FilterFull {
                capacity: g.capacity(),
            });
        }
        Self::from_sorted(g, self.iter_ordered())
    }

    /// Reconstructs the stored multiset from the slot metadata alone, in
    /// ascending order, checking every structural invariant on the way.
    pub fn decode(&self) -> Result<Vec<Fingerprint>> {
        let values = decode_slots(&self.slots)?;
        if values.len() as u64 != self.count {
            return Err(Error::CorruptEncoding(format!(
                "decoded {} fingerprints but count is {}",
                values.len(),
                self.count
            )));
        }
        let r = self.geometry.r;
        let p = self.width();
        Ok(values
            .into_iter()
            .map(|(fq, fr)| Fingerprint::from_parts((fq << r) | fr, p))
            .collect())
    }

    pub fn cluster_stats(&self) -> ClusterStats {
        cluster_stats(&self.slots)
    }
}

/// k-way merge of ascending fingerprint streams.
fn merge_sorted<'a, I>(streams: I) -> impl Iterator<Item = Fingerprint> + 'a
where
    I: IntoIterator<Item = OrderedIter<'a>>,
{
    let mut heads: Vec<(Option<Fingerprint>, OrderedIter<'a>)> =
        streams.into_iter().map(|mut it| (it.next(), it)).collect();
    std::iter::from_fn(move || {
        let idx = heads
            .iter()
            .enumerate()
            .filter_map(|(i, (h, _))| h.map(|f| (f.value(), i)))
            .min()?
            .1;
        let (head, it) = &mut heads[idx];
        let out = *head;
        *head = it.next();
        out
    })
}

/// Decodes `(bucket, remainder)` pairs in ascending order, validating metadata.
pub(crate) fn decode_slots(slots: &SlotArray) -> Result<Vec<(u64, u64)>> {
    let m = slots.len();
    let mask = m - 1;
    let start = (0..m)
        .find(|&i| slots.is_empty_at(i))
        .ok_or_else(|| Error::CorruptEncoding("no empty slot".into()))?;

    let corrupt = |i: u64, what: &str| Err(Error::CorruptEncoding(format!("slot {i}: {what}")));
    let mut out = Vec::new();
    let mut pending = std::collections::VecDeque::new();
    let mut in_cluster = false;
    let mut bucket = 0u64;
    let mut last_rem = 0u64;

    for k in 1..=m {
        let i = (start + k) & mask;
        let s = slots.get(i);
        if s.is_empty() {
            if s.remainder != 0 {
                return corrupt(i, "empty slot carries remainder bits");
            }
            if !pending.is_empty() {
                return corrupt(i, "cluster ended with occupied buckets lacking runs");
            }
            in_cluster = false;
            continue;
        }
        if s.occupied {
            pending.push_back(i);
        }
        if !in_cluster {
            if s.shifted || s.continuation {
                return corrupt(i, "cluster starts with a shifted or continuation slot");
            }
            in_cluster = true;
        }
        if s.continuation {
            if !s.shifted {
                return corrupt(i, "continuation slot is not marked shifted");
            }
            if s.remainder < last_rem {
                return corrupt(i, "run is not sorted");
            }
        } else {
            bucket = match pending.pop_front() {
                Some(b) => b,
                None => return corrupt(i, "run head without an occupied bucket"),
            };
            if s.shifted != (bucket != i) {
                return corrupt(i, "is_shifted disagrees with the run's bucket");
            }
        }
        last_rem = s.remainder;
        out.push((bucket, s.remainder));
    }
    if !pending.is_empty() {
        return Err(Error::CorruptEncoding(
            "occupied buckets without runs".into(),
        ));
    }

    // Traversal began after `start`, so the output is two ascending pieces.
    if let Some(cut) = out.windows(2).position(|w| w[1] < w[0]) {
        out.rotate_left(cut + 1);
    }
    if out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::CorruptEncoding(
            "runs are out of bucket order".into(),
        ));
    }
    Ok(out)
}

pub(crate) fn cluster_stats(slots: &SlotArray) -> ClusterStats {
    let m = slots.len();
    let mask = m - 1;
    let Some(start) = (0..m).find(|&i| slots.is_empty_at(i)) else {
        return ClusterStats::default();
    };
    let mut histogram = BTreeMap::new();
    let mut run = 0u64;
    for k in 1..=m {
        let i = (start + k) & mask;
        if slots.is_empty_at(i) {
            if run > 0 {
                *histogram.entry(run).or_insert(0) += 1;
                run = 0;
            }
        } else {
            run += 1;
        }
    }
    let count: u64 = histogram.values().sum();
    let total: u64 = histogram.iter().map(|(l, n)| l * n).sum();
    let squares: u64 = histogram.iter().map(|(l, n)| l * l * n).sum();
    ClusterStats {
        count,
        mean_len: if count == 0 {
            0.0
        } else {
            total as f64 / count as f64
        },
        element_weighted_mean_len: if total == 0 {
            0.0
        } else {
            squares as f64 / total as f64
        },
        max_len: histogram.keys().next_back().copied().unwrap_or(0),
        histogram,
    }
}
