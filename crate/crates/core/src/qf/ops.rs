//! In-place lookup, insert and delete over any slot backend.
//!
//! Every routine touches only the cluster holding the target bucket plus the
//! slots bordering it. Loops are bounded by the slot count so that a corrupt
//! backing store yields `CorruptEncoding` instead of spinning.

use super::slots::{Slot, SlotRead, SlotWrite};
use crate::error::{Error, Result};

#[inline]
fn next(i: u64, mask: u64) -> u64 {
    (i + 1) & mask
}

#[inline]
fn prev(i: u64, mask: u64) -> u64 {
    i.wrapping_sub(1) & mask
}

fn runaway() -> Error {
    Error::CorruptEncoding("scan did not terminate within one cycle of the slot array".into())
}

/// Slot holding the first remainder of bucket `fq`. `fq` must be marked occupied.
pub(crate) fn run_start<S: SlotRead + ?Sized>(slots: &mut S, fq: u64) -> Result<u64> {
    let m = slots.slot_count();
    let mask = m - 1;

    // Walk back to the start of the cluster.
    let mut bucket = fq;
    let mut steps = 0;
    while slots.get(bucket)?.shifted {
        bucket = prev(bucket, mask);
        steps += 1;
        if steps >= m {
            return Err(runaway());
        }
    }

    // Walk forward, pairing runs with occupied buckets.
    let mut slot = bucket;
    let (mut slot_steps, mut bucket_steps) = (0, 0);
    while bucket != fq {
        loop {
            slot = next(slot, mask);
            slot_steps += 1;
            if !slots.get(slot)?.continuation {
                break;
            }
            if slot_steps >= m {
                return Err(runaway());
            }
        }
        loop {
            bucket = next(bucket, mask);
            bucket_steps += 1;
            if slots.occupied(bucket)? {
                break;
            }
            if bucket_steps >= m {
                return Err(runaway());
            }
        }
    }
    Ok(slot)
}

pub(crate) fn contains<S: SlotRead + ?Sized>(slots: &mut S, fq: u64, fr: u64) -> Result<bool> {
    if !slots.occupied(fq)? {
        return Ok(false);
    }
    let mask = slots.slot_count() - 1;
    let mut s = run_start(slots, fq)?;
    let mut slot = slots.get(s)?;
    for _ in 0..slots.slot_count() {
        if slot.remainder == fr {
            return Ok(true);
        }
        s = next(s, mask);
        slot = slots.get(s)?;
        if !slot.continuation {
            return Ok(false);
        }
    }
    Err(runaway())
}

/// Inserts `(fq, fr)`, keeping each run sorted. The caller enforces capacity,
/// which guarantees an empty slot to absorb the shift.
pub(crate) fn insert<S: SlotWrite + ?Sized>(slots: &mut S, fq: u64, fr: u64) -> Result<()> {
    let m = slots.slot_count();
    let mask = m - 1;

    let home = slots.get(fq)?;
    if home.is_empty() {
        return slots.set(
            fq,
            Slot {
                occupied: true,
                continuation: false,
                shifted: false,
                remainder: fr,
            },
        );
    }

    let was_occupied = home.occupied;
    if !was_occupied {
        slots.set(
            fq,
            Slot {
                occupied: true,
                ..home
            },
        )?;
    }
    let start = run_start(slots, fq)?;

    let mut pos = start;
    if was_occupied {
        let mut steps = 0;
        loop {
            if slots.get(pos)?.remainder >= fr {
                break;
            }
            pos = next(pos, mask);
            if !slots.get(pos)?.continuation {
                break;
            }
            steps += 1;
            if steps >= m {
                return Err(runaway());
            }
        }
    }
    let new_head = pos == start;

    let mut carry = Slot {
        occupied: false,
        continuation: !new_head,
        shifted: pos != fq,
        remainder: fr,
    };
    let mut i = pos;
    for step in 0..m {
        let cur = slots.get(i)?;
        slots.set(
            i,
            Slot {
                occupied: cur.occupied,
                ..carry
            },
        )?;
        if cur.is_empty() {
            return Ok(());
        }
        carry = Slot {
            occupied: false,
            // The displaced head of our own run becomes its second element.
            continuation: cur.continuation || (step == 0 && was_occupied && new_head),
            shifted: true,
            remainder: cur.remainder,
        };
        i = next(i, mask);
    }
    Err(runaway())
}

fn next_occupied<S: SlotRead + ?Sized>(slots: &mut S, mut bucket: u64) -> Result<u64> {
    let mask = slots.slot_count() - 1;
    for _ in 0..slots.slot_count() {
        bucket = next(bucket, mask);
        if slots.occupied(bucket)? {
            return Ok(bucket);
        }
    }
    Err(runaway())
}

/// Removes one copy of `(fq, fr)`. Returns `false` if it is not stored.
pub(crate) fn remove<S: SlotWrite + ?Sized>(slots: &mut S, fq: u64, fr: u64) -> Result<bool> {
    let m = slots.slot_count();
    let mask = m - 1;

    if !slots.occupied(fq)? {
        return Ok(false);
    }
    let start = run_start(slots, fq)?;
    let mut pos = start;
    let mut steps = 0;
    loop {
        let rem = slots.get(pos)?.remainder;
        if rem == fr {
            break;
        }
        if rem > fr {
            return Ok(false);
        }
        pos = next(pos, mask);
        if !slots.get(pos)?.continuation {
            return Ok(false);
        }
        steps += 1;
        if steps >= m {
            return Err(runaway());
        }
    }

    let removing_head = pos == start;
    if removing_head && !slots.get(next(pos, mask))?.continuation {
        let home = slots.get(fq)?;
        slots.set(
            fq,
            Slot {
                occupied: false,
                ..home
            },
        )?;
    }

    // Shift the rest of the cluster left by one, recomputing is_shifted for
    // each run head against the bucket it belongs to.
    let mut j = pos;
    let mut bucket = fq;
    for _ in 0..m {
        let n = next(j, mask);
        let following = slots.get(n)?;
        let cur_occupied = slots.get(j)?.occupied;
        if following.is_empty() || !following.shifted {
            slots.set(
                j,
                Slot {
                    occupied: cur_occupied,
                    ..Slot::default()
                },
            )?;
            return Ok(true);
        }
        let head = if !following.continuation {
            bucket = next_occupied(slots, bucket)?;
            true
        } else {
            j == pos && removing_head
        };
        slots.set(
            j,
            Slot {
                occupied: cur_occupied,
                continuation: !head,
                shifted: !head || bucket != j,
                remainder: following.remainder,
            },
        )?;
        j = n;
    }
    Err(runaway())
}
