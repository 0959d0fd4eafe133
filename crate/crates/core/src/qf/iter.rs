use super::{QuotientFilter, SlotArray};
use crate::fingerprint::Fingerprint;

/// Ascending traversal of a filter's fingerprints in one left-to-right pass.
///
/// A cluster that wraps from the last slot to slot 0 is decoded up front: its
/// entries whose bucket precedes the wrap point are emitted last, the rest
/// first. Everything else streams straight from the slot array.
pub struct OrderedIter<'a> {
    slots: &'a SlotArray,
    r: u32,
    width: u32,
    low: Vec<u64>,
    low_pos: usize,
    high: Vec<u64>,
    high_pos: usize,
    cursor: u64,
    end: u64,
    bucket: u64,
}

impl<'a> OrderedIter<'a> {
    pub(crate) fn new(qf: &'a QuotientFilter) -> Self {
        let slots = &qf.slots;
        let m = slots.len();
        let mut it = Self {
            slots,
            r: qf.geometry.r,
            width: qf.width(),
            low: Vec::new(),
            low_pos: 0,
            high: Vec::new(),
            high_pos: 0,
            cursor: 0,
            end: 0,
            bucket: 0,
        };
        if qf.count == 0 {
            return it;
        }
        it.end = m;
        let first = slots.get(0);
        if first.is_empty() || !first.shifted {
            return it;
        }

        // Slot 0 continues a cluster that started near the end of the array.
        let mask = m - 1;
        let mut start = m - 1;
        while slots.get(start).shifted {
            start = (start + mask) & mask;
        }
        let mut bucket = start;
        let mut i = start;
        loop {
            let s = slots.get(i);
            if s.is_empty() || (i < start && !s.shifted) {
                break;
            }
            if !s.shifted {
                bucket = i;
            } else if !s.continuation {
                bucket = next_occupied(slots, bucket);
            }
            let v = (bucket << it.r) | s.remainder;
            if bucket >= start {
                it.high.push(v);
            } else {
                it.low.push(v);
            }
            i = (i + 1) & mask;
        }
        it.cursor = i;
        it.end = start;
        it
    }

    fn make(&self, v: u64) -> Fingerprint {
        Fingerprint::from_parts(v, self.width)
    }
}

fn next_occupied(slots: &SlotArray, mut b: u64) -> u64 {
    let mask = slots.len() - 1;
    loop {
        b = (b + 1) & mask;
        if slots.is_occupied(b) {
            return b;
        }
    }
}

impl Iterator for OrderedIter<'_> {
    type Item = Fingerprint;

    fn next(&mut self) -> Option<Fingerprint> {
        if self.low_pos < self.low.len() {
            self.low_pos += 1;
            return Some(self.make(self.low[self.low_pos - 1]));
        }
        while self.cursor < self.end {
            let i = self.cursor;
            self.cursor += 1;
            let s = self.slots.get(i);
            if s.is_empty() {
                continue;
            }
            if !s.shifted {
                self.bucket = i;
            } else if !s.continuation {
                self.bucket = next_occupied(self.slots, self.bucket);
            }
            return Some(self.make((self.bucket << self.r) | s.remainder));
        }
        if self.high_pos < self.high.len() {
            self.high_pos += 1;
            return Some(self.make(self.high[self.high_pos - 1]));
        }
        None
    }
}
