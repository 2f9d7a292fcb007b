//! Source coverage bit vectors.
//!
//! Positions are 1-based to match the rest of the public interface; bit
//! `i - 1` of the backing words stores position `i`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoverageVector {
    len: usize,
    covered: usize,
    words: Vec<u64>,
}

impl CoverageVector {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidArgument(
                "coverage vector length must be at least 1".into(),
            ));
        }
        Ok(Self {
            len,
            covered: 0,
            words: vec![0; len.div_ceil(64)],
        })
    }

    /// A vector of length `len` with exactly positions `begin..=end` set.
    /// The span `(0, 0)` yields the all-zero vector.
    pub fn from_span(len: usize, begin: usize, end: usize) -> Result<Self> {
        let mut cov = Self::new(len)?;
        if (begin, end) == (0, 0) {
            return Ok(cov);
        }
        if begin == 0 || begin > end || end > len {
            return Err(Error::InvalidArgument(format!(
                "span {begin}:{end} out of range for length {len}"
            )));
        }
        for i in begin..=end {
            cov.set(i);
        }
        Ok(cov)
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut cov = Self::new(bits.len())?;
        for (k, &b) in bits.iter().enumerate() {
            if b {
                cov.set(k + 1);
            }
        }
        Ok(cov)
    }

    fn set(&mut self, pos: usize) {
        let (w, b) = ((pos - 1) / 64, (pos - 1) % 64);
        if self.words[w] & (1 << b) == 0 {
            self.words[w] |= 1 << b;
            self.covered += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn covered_count(&self) -> usize {
        self.covered
    }

    pub fn is_full(&self) -> bool {
        self.covered == self.len
    }

    pub fn is_zero(&self) -> bool {
        self.covered == 0
    }

    /// Whether 1-based position `pos` is covered. Out-of-range positions
    /// read as uncovered.
    pub fn is_covered(&self, pos: usize) -> bool {
        if pos == 0 || pos > self.len {
            return false;
        }
        let (w, b) = ((pos - 1) / 64, (pos - 1) % 64);
        self.words[w] & (1 << b) != 0
    }

    pub fn all_uncovered(&self, begin: usize, end: usize) -> bool {
        (begin..=end).all(|i| !self.is_covered(i))
    }

    pub fn all_covered(&self, begin: usize, end: usize) -> bool {
        (begin..=end).all(|i| self.is_covered(i))
    }

    pub fn bits(&self) -> Vec<bool> {
        (1..=self.len).map(|i| self.is_covered(i)).collect()
    }

    pub fn uncovered_positions(&self) -> Vec<usize> {
        (1..=self.len).filter(|&i| !self.is_covered(i)).collect()
    }

    /// Bitwise union of two disjoint vectors.
    pub fn merge(&self, other: &CoverageVector) -> Result<CoverageVector> {
        if self.len != other.len {
            return Err(Error::InvalidArgument(format!(
                "coverage length mismatch: {} vs {}",
                self.len, other.len
            )));
        }
        if let Some(pos) = self.first_overlap(other) {
            return Err(Error::CoverageConflict(pos));
        }
        let words: Vec<u64> = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a | b)
            .collect();
        Ok(CoverageVector {
            len: self.len,
            covered: self.covered + other.covered,
            words,
        })
    }

    fn first_overlap(&self, other: &CoverageVector) -> Option<usize> {
        self.words
            .iter()
            .zip(&other.words)
            .enumerate()
            .find_map(|(w, (a, b))| {
                let both = a & b;
                (both != 0).then(|| w * 64 + both.trailing_zeros() as usize + 1)
            })
    }
}

impl fmt::Debug for CoverageVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for i in 1..=self.len {
            if i > 1 {
                write!(f, ",")?;
            }
            write!(f, "{}", u8::from(self.is_covered(i)))?;
        }
        write!(f, ")")
    }
}
