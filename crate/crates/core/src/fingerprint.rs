//! Keys to fingerprints, and fingerprints to (quotient, remainder) pairs.
//!
//! A fingerprint is a `p`-bit integer. Quotienting splits it into the `q = p - r`
//! high bits, which pick a bucket, and the `r` low bits, which are what the
//! filter actually stores.

use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};

/// Largest supported fingerprint width.
pub const MAX_WIDTH: u32 = 64;

#[inline]
pub(crate) fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// A `width`-bit hash value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint {
    value: u64,
    width: u32,
}

impl Fingerprint {
    pub fn new(value: u64, width: u32) -> Result<Self> {
        check_width(width)?;
        if value & !low_mask(width) != 0 {
            return Err(Error::InvalidWidth(format!(
                "value {value:#x} does not fit in {width} bits"
            )));
        }
        Ok(Self { value, width })
    }

    /// Builds a fingerprint without validation; `value` must fit in `width` bits.
    #[inline]
    pub(crate) fn from_parts(value: u64, width: u32) -> Self {
        debug_assert!((1..=MAX_WIDTH).contains(&width));
        debug_assert_eq!(value & !low_mask(width), 0);
        Self { value, width }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Splits into the high `width - remainder_bits` bits and the low
    /// `remainder_bits` bits.
    pub fn split(&self, remainder_bits: u32) -> Result<QuotientRemainder> {
        if remainder_bits >= self.width {
            return Err(Error::InvalidWidth(format!(
                "remainder width {remainder_bits} must be below fingerprint width {}",
                self.width
            )));
        }
        Ok(QuotientRemainder {
            quotient: if remainder_bits == 0 {
                self.value
            } else {
                self.value >> remainder_bits
            },
            remainder: self.value & low_mask(remainder_bits),
            quotient_bits: self.width - remainder_bits,
            remainder_bits,
        })
    }
}

/// A fingerprint in quotiented form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuotientRemainder {
    pub quotient: u64,
    pub remainder: u64,
    pub quotient_bits: u32,
    pub remainder_bits: u32,
}

impl QuotientRemainder {
    pub fn new(
        quotient: u64,
        remainder: u64,
        quotient_bits: u32,
        remainder_bits: u32,
    ) -> Result<Self> {
        let width = quotient_bits + remainder_bits;
        check_width(width)?;
        if quotient_bits == 0 {
            return Err(Error::InvalidWidth(
                "quotient width must be positive".into(),
            ));
        }
        if quotient & !low_mask(quotient_bits) != 0 || remainder & !low_mask(remainder_bits) != 0 {
            return Err(Error::InvalidWidth(format!(
                "({quotient:#x}, {remainder:#x}) does not fit in ({quotient_bits}, {remainder_bits}) bits"
            )));
        }
        Ok(Self {
            quotient,
            remainder,
            quotient_bits,
            remainder_bits,
        })
    }

    pub fn join(&self) -> Fingerprint {
        let value = if self.remainder_bits == 0 {
            self.quotient
        } else {
            (self.quotient << self.remainder_bits) | self.remainder
        };
        Fingerprint::from_parts(value, self.quotient_bits + self.remainder_bits)
    }
}

fn check_width(width: u32) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::InvalidWidth(format!(
            "fingerprint width {width} outside [1, {MAX_WIDTH}]"
        )));
    }
    Ok(())
}

/// Keyed 64-bit hash of `key`, truncated to its top `width` bits.
pub fn hash_to_fingerprint(key: &[u8], width: u32, seed: u64) -> Result<Fingerprint> {
    check_width(width)?;
    Ok(Fingerprint::from_parts(
        hash_top_bits(key, width, seed),
        width,
    ))
}

#[inline]
pub(crate) fn hash_top_bits(key: &[u8], width: u32, seed: u64) -> u64 {
    let h = xxh3_64_with_seed(key, seed);
    if width == 64 {
        h
    } else {
        h >> (64 - width)
    }
}

/// Hashes a 64-bit key, serialized little-endian.
pub fn hash_u64(key: u64, width: u32, seed: u64) -> Result<Fingerprint> {
    hash_to_fingerprint(&key.to_le_bytes(), width, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn width_one_range() {
        for key in 0u64..64 {
            let f = hash_u64(key, 1, 0).unwrap();
            assert!(f.value() <= 1);
        }
    }

    #[test]
    fn hash_is_deterministic() {
        let a = hash_to_fingerprint(b"quotient", 40, 7).unwrap();
        let b = hash_to_fingerprint(b"quotient", 40, 7).unwrap();
        assert_eq!(a, b);
        let c = hash_to_fingerprint(b"quotient", 40, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(matches!(
            hash_to_fingerprint(b"x", 0, 0),
            Err(Error::InvalidWidth(_))
        ));
        assert!(matches!(
            hash_to_fingerprint(b"x", 65, 0),
            Err(Error::InvalidWidth(_))
        ));
        let f = Fingerprint::new(5, 8).unwrap();
        assert!(matches!(f.split(8), Err(Error::InvalidWidth(_))));
        assert!(Fingerprint::new(256, 8).is_err());
    }

    // Chi-square over the top 8 bits of 10^6 p=16 fingerprints. The critical
    // value for 255 degrees of freedom at significance 0.001 is 330.52.
    #[test]
    fn chi_square_uniformity() {
        let n = 1_000_000u64;
        let mut buckets = [0u64; 256];
        for key in 0..n {
            let f = hash_u64(key.wrapping_mul(0x9E37_79B9_7F4A_7C15), 16, 0).unwrap();
            buckets[(f.value() >> 8) as usize] += 1;
        }
        let expected = n as f64 / 256.0;
        let chi2: f64 = buckets
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 330.52, "chi-square {chi2}");
    }

    #[test]
    fn split_examples() {
        let qr = Fingerprint::new(0, 8).unwrap().split(3).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (0, 0));
        let qr = Fingerprint::new(15, 8).unwrap().split(4).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (0, 15));
        let qr = Fingerprint::new(0xAB, 8).unwrap().split(4).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (0xA, 0xB));
    }

    #[test]
    fn join_examples() {
        assert_eq!(
            QuotientRemainder::new(0, 0, 4, 4).unwrap().join().value(),
            0
        );
        let f = QuotientRemainder::new(0xA, 0xB, 4, 4).unwrap().join();
        assert_eq!(f.value(), 0xAB);
        assert_eq!(f.width(), 8);
    }

    #[test]
    fn exhaustive_round_trip_p12_r5() {
        for v in 0..(1u64 << 12) {
            let f = Fingerprint::new(v, 12).unwrap();
            assert_eq!(f.split(5).unwrap().join(), f);
        }
    }

    #[test]
    fn full_width_split() {
        let f = Fingerprint::new(u64::MAX, 64).unwrap();
        let qr = f.split(0).unwrap();
        assert_eq!(qr.quotient, u64::MAX);
        assert_eq!(qr.join(), f);
        let qr = f.split(63).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (1, u64::MAX >> 1));
    }

    proptest! {
        #[test]
        fn split_is_monotone(p in 2u32..=64, a: u64, b: u64, r_frac in 0.0f64..1.0) {
            let r = ((p - 1) as f64 * r_frac) as u32;
            let (a, b) = (a & low_mask(p), b & low_mask(p));
            let (lo, hi) = (a.min(b), a.max(b));
            let x = Fingerprint::new(lo, p).unwrap().split(r).unwrap();
            let y = Fingerprint::new(hi, p).unwrap().split(r).unwrap();
            prop_assert!((x.quotient, x.remainder) <= (y.quotient, y.remainder));
            prop_assert_eq!(x.join().value(), lo);
        }
    }
}
