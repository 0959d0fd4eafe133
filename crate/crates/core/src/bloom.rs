//! Classic Bloom filter, the baseline the quotient filters are measured against.
//!
//! The `k` probe positions for a key come from the fingerprint hash reseeded
//! with seeds `1..=k`, each reduced modulo `m`.

use crate::error::{Error, Result};
use crate::fingerprint::hash_top_bits;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    bits: Vec<u64>,
    m: u64,
    k: u32,
    expected_n: u64,
    inserted: u64,
}

/// `max(1, round((m / n) ln 2))`.
pub fn optimal_hashes(m: u64, n: u64) -> u32 {
    let k = (m as f64 / n as f64 * std::f64::consts::LN_2).round();
    k.max(1.0) as u32
}

/// `(1 - e^{-nk/m})^k`.
pub fn expected_fp_rate(m: u64, n: u64, k: u32) -> f64 {
    (1.0 - (-(n as f64) * k as f64 / m as f64).exp()).powi(k as i32)
}

impl BloomFilter {
    /// An `m`-bit filter sized for `expected_n` keys with the optimal hash count.
    pub fn new(m: u64, expected_n: u64) -> Result<Self> {
        if m == 0 || expected_n == 0 {
            return Err(Error::InvalidGeometry(format!(
                "bloom filter needs m >= 1 and n >= 1 (m={m}, n={expected_n})"
            )));
        }
        Self::with_hashes(m, expected_n, optimal_hashes(m, expected_n))
    }

    pub fn with_hashes(m: u64, expected_n: u64, k: u32) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidGeometry(format!(
                "bloom filter needs m >= 1 and k >= 1 (m={m}, k={k})"
            )));
        }
        Ok(Self {
            bits: vec![0; m.div_ceil(64) as usize],
            m,
            k,
            expected_n,
            inserted: 0,
        })
    }

    pub fn bits(&self) -> u64 {
        self.m
    }

    pub fn hashes(&self) -> u32 {
        self.k
    }

    pub fn expected_n(&self) -> u64 {
        self.expected_n
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    #[inline]
    fn position(&self, key: &[u8], i: u32) -> u64 {
        hash_top_bits(key, 64, i as u64) % self.m
    }

    #[inline]
    fn test(&self, pos: u64) -> bool {
        self.bits[(pos / 64) as usize] >> (pos % 64) & 1 == 1
    }

    pub fn insert(&mut self, key: &[u8]) {
        for i in 1..=self.k {
            let pos = self.position(key, i);
            self.bits[(pos / 64) as usize] |= 1 << (pos % 64);
        }
        self.inserted += 1;
    }

    pub fn may_contain(&self, key: &[u8]) -> bool {
        self.may_contain_probes(key).0
    }

    /// Answer plus the number of bits examined before it was known.
    pub fn may_contain_probes(&self, key: &[u8]) -> (bool, u32) {
        for i in 1..=self.k {
            if !self.test(self.position(key, i)) {
                return (false, i);
            }
        }
        (true, self.k)
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn fill_ratio(&self) -> f64 {
        self.popcount() as f64 / self.m as f64
    }

    /// Model false-positive rate for the keys inserted so far.
    pub fn expected_fp_rate(&self) -> f64 {
        expected_fp_rate(self.m, self.inserted, self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(i: u64) -> [u8; 8] {
        i.to_le_bytes()
    }

    #[test]
    fn hash_count_examples() {
        assert_eq!(BloomFilter::new(8000, 1000).unwrap().hashes(), 6);
        assert_eq!(BloomFilter::new(1000, 1000).unwrap().hashes(), 1);
        assert_eq!(BloomFilter::new(16000, 1000).unwrap().hashes(), 11);
        assert_eq!(BloomFilter::new(10, 1000).unwrap().hashes(), 1);
        assert!(matches!(
            BloomFilter::new(0, 10),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            BloomFilter::new(10, 0),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn insert_and_query() {
        let mut bf = BloomFilter::new(1 << 12, 256).unwrap();
        assert!((0..1000).all(|i| !bf.may_contain(&key(i))));
        let mut last = 0;
        for i in 0..256 {
            bf.insert(&key(i));
            let pc = bf.popcount();
            assert!(pc - last <= bf.hashes() as u64);
            last = pc;
        }
        assert!((0..256).all(|i| bf.may_contain(&key(i))));
        assert_eq!(bf.inserted(), 256);
    }

    // Measured rate within 25% of (1 - e^{-nk/m})^k at m/n in {8, 12, 16}.
    #[test]
    fn fp_rate_tracks_model() {
        let n = 20_000u64;
        for bits_per_key in [8u64, 12, 16] {
            let mut bf = BloomFilter::new(bits_per_key * n, n).unwrap();
            for i in 0..n {
                bf.insert(&key(i));
            }
            let queries = 1_000_000u64;
            let fp = (n..n + queries)
                .filter(|&i| bf.may_contain(&key(i)))
                .count();
            let rate = fp as f64 / queries as f64;
            let model = bf.expected_fp_rate();
            assert!(
                (rate - model).abs() <= 0.25 * model,
                "m/n={bits_per_key}: measured {rate}, model {model}"
            );
        }
    }

    #[test]
    fn negative_queries_stop_early() {
        let n = 50_000u64;
        let mut bf = BloomFilter::new(8 * n, n).unwrap();
        for i in 0..n {
            bf.insert(&key(i));
        }
        let rho = bf.fill_ratio();
        let queries = 200_000u64;
        let mut probes = 0u64;
        let mut negatives = 0u64;
        for i in n..n + queries {
            let (hit, p) = bf.may_contain_probes(&key(i));
            if !hit {
                probes += p as u64;
                negatives += 1;
            }
        }
        let mean = probes as f64 / negatives as f64;
        // Geometric number of probes truncated at k, conditioned on a miss.
        let k = bf.hashes() as i32;
        let expected: f64 = (1..=k)
            .map(|j| j as f64 * rho.powi(j - 1) * (1.0 - rho))
            .sum::<f64>()
            / (1.0 - rho.powi(k));
        assert!(
            (mean - expected).abs() < 0.05,
            "mean {mean}, expected {expected}"
        );
        assert!((1.8..2.4).contains(&mean));
    }
}
