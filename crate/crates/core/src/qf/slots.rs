//! Bit-packed slot storage.
//!
//! Slot `i` lives at bits `[i * (r + 3), (i + 1) * (r + 3))` of one contiguous
//! little-endian bit string: bit 0 is `is_occupied`, bit 1 `is_continuation`,
//! bit 2 `is_shifted`, and bits `3..r + 3` hold the remainder.

use crate::error::Result;
use crate::fingerprint::low_mask;

pub(crate) const META_BITS: u32 = 3;

const OCCUPIED: u64 = 0b001;
const CONTINUATION: u64 = 0b010;
const SHIFTED: u64 = 0b100;

/// One decoded slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Slot {
    pub occupied: bool,
    pub continuation: bool,
    pub shifted: bool,
    pub remainder: u64,
}

impl Slot {
    /// A slot holds no remainder exactly when all three metadata bits are clear.
    #[inline]
    pub fn is_empty(&self) -> bool {
        !self.occupied && !self.continuation && !self.shifted
    }

    #[inline]
    fn meta(&self) -> u64 {
        (self.occupied as u64) | ((self.continuation as u64) << 1) | ((self.shifted as u64) << 2)
    }

    #[inline]
    fn from_meta(meta: u64, remainder: u64) -> Self {
        Self {
            occupied: meta & OCCUPIED != 0,
            continuation: meta & CONTINUATION != 0,
            shifted: meta & SHIFTED != 0,
            remainder,
        }
    }
}

#[inline]
pub(crate) fn read_bits(words: &[u64], pos: u64, len: u32) -> u64 {
    debug_assert!((1..=64).contains(&len));
    let w = (pos / 64) as usize;
    let off = (pos % 64) as u32;
    let mut v = words[w] >> off;
    if off + len > 64 {
        v |= words[w + 1] << (64 - off);
    }
    v & low_mask(len)
}

#[inline]
pub(crate) fn write_bits(words: &mut [u64], pos: u64, len: u32, value: u64) {
    debug_assert!((1..=64).contains(&len));
    let mask = low_mask(len);
    let value = value & mask;
    let w = (pos / 64) as usize;
    let off = (pos % 64) as u32;
    words[w] = (words[w] & !(mask << off)) | (value << off);
    if off + len > 64 {
        let spill = off + len - 64;
        let hi_mask = low_mask(spill);
        words[w + 1] = (words[w + 1] & !hi_mask) | (value >> (64 - off));
    }
}

/// `2^q` slots of `r + 3` bits each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotArray {
    words: Vec<u64>,
    len: u64,
    remainder_bits: u32,
}

impl SlotArray {
    pub fn new(len: u64, remainder_bits: u32) -> Self {
        let bits = len * (remainder_bits + META_BITS) as u64;
        Self {
            words: vec![0; bits.div_ceil(64) as usize],
            len,
            remainder_bits,
        }
    }

    #[inline]
    pub fn len(&self) -> u64 {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn remainder_bits(&self) -> u32 {
        self.remainder_bits
    }

    #[inline]
    fn slot_width(&self) -> u64 {
        (self.remainder_bits + META_BITS) as u64
    }

    /// Number of meaningful bytes in the packed representation.
    pub fn byte_len(&self) -> usize {
        (self.len * self.slot_width()).div_ceil(8) as usize
    }

    #[inline]
    pub fn get(&self, i: u64) -> Slot {
        debug_assert!(i < self.len);
        let pos = i * self.slot_width();
        let meta = read_bits(&self.words, pos, META_BITS);
        let rem = read_bits(&self.words, pos + META_BITS as u64, self.remainder_bits);
        Slot::from_meta(meta, rem)
    }

    #[inline]
    pub fn set(&mut self, i: u64, slot: Slot) {
        debug_assert!(i < self.len);
        let pos = i * self.slot_width();
        write_bits(&mut self.words, pos, META_BITS, slot.meta());
        write_bits(
            &mut self.words,
            pos + META_BITS as u64,
            self.remainder_bits,
            slot.remainder,
        );
    }

    #[inline]
    pub(crate) fn is_occupied(&self, i: u64) -> bool {
        read_bits(&self.words, i * self.slot_width(), 1) != 0
    }

    #[inline]
    pub(crate) fn is_empty_at(&self, i: u64) -> bool {
        read_bits(&self.words, i * self.slot_width(), META_BITS) == 0
    }

    /// Packed little-endian bytes, exactly `byte_len()` long.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.words.len() * 8);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(self.byte_len());
        out
    }

    /// The backing words: slot `i` starts at bit `i * (r + 3)`, counting from
    /// the least significant bit of word 0. Bits past the last slot are zero.
    pub fn as_words(&self) -> &[u64] {
        &self.words
    }

    /// Inverse of [`SlotArray::to_bytes`]; trailing bytes beyond `byte_len()` are ignored.
    pub fn from_bytes(len: u64, remainder_bits: u32, bytes: &[u8]) -> Self {
        let mut arr = Self::new(len, remainder_bits);
        let n = arr.byte_len().min(bytes.len());
        for (i, chunk) in bytes[..n].chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            arr.words[i] = u64::from_le_bytes(buf);
        }
        // Bits past the last slot stay zero so equality is bit-exact.
        let total = len * arr.slot_width();
        if !total.is_multiple_of(64) {
            if let Some(last) = arr.words.last_mut() {
                *last &= low_mask((total % 64) as u32);
            }
        }
        arr
    }

    pub(crate) fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }
}

/// Read access to a slot array, possibly backed by pages that must be fetched.
pub(crate) trait SlotRead {
    fn slot_count(&self) -> u64;
    fn get(&mut self, i: u64) -> Result<Slot>;

    fn occupied(&mut self, i: u64) -> Result<bool> {
        Ok(self.get(i)?.occupied)
    }
}

/// Read-write access to a slot array.
pub(crate) trait SlotWrite: SlotRead {
    fn set(&mut self, i: u64, slot: Slot) -> Result<()>;
}

impl SlotRead for &SlotArray {
    #[inline]
    fn slot_count(&self) -> u64 {
        self.len
    }
    #[inline]
    fn get(&mut self, i: u64) -> Result<Slot> {
        Ok(SlotArray::get(self, i))
    }
}

impl SlotRead for SlotArray {
    #[inline]
    fn slot_count(&self) -> u64 {
        self.len
    }
    #[inline]
    fn get(&mut self, i: u64) -> Result<Slot> {
        Ok(SlotArray::get(self, i))
    }
}

impl SlotWrite for SlotArray {
    #[inline]
    fn set(&mut self, i: u64, slot: Slot) -> Result<()> {
        SlotArray::set(self, i, slot);
        Ok(())
    }
}
