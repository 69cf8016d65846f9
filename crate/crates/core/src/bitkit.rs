//! Fixed-length bit patterns, the cover order and superposition.
//!
//! Bits are packed into `u64` words, least significant bit first: position
//! `i` lives in word `i / 64` at bit `i % 64`. Serializing the words as
//! little-endian bytes therefore puts position `i` at byte `i / 8`, bit
//! `i % 8`, which is the layout of the signature files.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitPattern {
    len: usize,
    words: Vec<u64>,
}

fn word_count(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

impl BitPattern {
    pub fn zeros(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::ZeroLength);
        }
        Ok(BitPattern {
            len,
            words: vec![0; word_count(len)],
        })
    }

    pub fn ones(len: usize) -> Result<Self> {
        let mut p = Self::zeros(len)?;
        p.words.iter_mut().for_each(|w| *w = u64::MAX);
        p.clear_tail();
        Ok(p)
    }

    pub fn from_positions(len: usize, positions: &[usize]) -> Result<Self> {
        let mut p = Self::zeros(len)?;
        for &pos in positions {
            p.try_set(pos)?;
        }
        Ok(p)
    }

    /// Decodes `ceil(len / 8)` bytes, position `i` at byte `i / 8`, bit `i % 8`.
    /// Bits beyond `len` in the final byte must be zero.
    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        let mut p = Self::zeros(len)?;
        let expected = len.div_ceil(8);
        if bytes.len() != expected {
            return Err(Error::LengthMismatch {
                left: bytes.len(),
                right: expected,
            });
        }
        for (k, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            p.words[k] = u64::from_le_bytes(buf);
        }
        let tail = p.words.clone();
        p.clear_tail();
        if p.words != tail {
            return Err(Error::PositionOutOfRange { pos: len, len });
        }
        Ok(p)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false: zero-length patterns cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, pos: usize) -> bool {
        pos < self.len && (self.words[pos / WORD_BITS] >> (pos % WORD_BITS)) & 1 == 1
    }

    pub fn try_set(&mut self, pos: usize) -> Result<()> {
        if pos >= self.len {
            return Err(Error::PositionOutOfRange { pos, len: self.len });
        }
        self.words[pos / WORD_BITS] |= 1 << (pos % WORD_BITS);
        Ok(())
    }

    /// Sets bit `pos`.
    ///
    /// Panics if `pos >= len`.
    pub fn set(&mut self, pos: usize) {
        assert!(
            pos < self.len,
            "bit {pos} out of range for length {}",
            self.len
        );
        self.words[pos / WORD_BITS] |= 1 << (pos % WORD_BITS);
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Ascending positions of the set bits.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(k * WORD_BITS + bit)
            })
        })
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn check_len(&self, other: &BitPattern) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }

    pub fn or(&self, other: &BitPattern) -> Result<BitPattern> {
        let mut out = self.clone();
        out.or_assign(other)?;
        Ok(out)
    }

    pub fn or_assign(&mut self, other: &BitPattern) -> Result<()> {
        self.check_len(other)?;
        self.words
            .iter_mut()
            .zip(&other.words)
            .for_each(|(a, b)| *a |= *b);
        Ok(())
    }

    /// True iff every set bit of `small` is also set in `self`.
    pub fn covers(&self, small: &BitPattern) -> Result<bool> {
        self.check_len(small)?;
        Ok(self.covers_unchecked(small))
    }

    pub(crate) fn covers_unchecked(&self, small: &BitPattern) -> bool {
        self.words
            .iter()
            .zip(&small.words)
            .all(|(big, small)| small & !big == 0)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

pub fn or(a: &BitPattern, b: &BitPattern) -> Result<BitPattern> {
    a.or(b)
}

pub fn covers(big: &BitPattern, small: &BitPattern) -> Result<bool> {
    big.covers(small)
}

/// Superimposes the code words of all set source bits.
///
/// `codebook[j]` is the code word of source bit `j`; the empty superposition
/// is the all-zero pattern of the code word length.
pub fn superimpose(codebook: &[BitPattern], source: &BitPattern) -> Result<BitPattern> {
    if codebook.len() != source.len() {
        return Err(Error::LengthMismatch {
            left: codebook.len(),
            right: source.len(),
        });
    }
    let n = codebook[0].len();
    let mut out = BitPattern::zeros(n)?;
    for word in codebook {
        if word.len() != n {
            return Err(Error::LengthMismatch {
                left: word.len(),
                right: n,
            });
        }
    }
    for j in source.positions() {
        out.or_assign(&codebook[j])?;
    }
    Ok(out)
}

/// Renders position 0 first, e.g. `0101`.
impl fmt::Display for BitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = BitPattern::zeros(s.len())?;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => p.set(i),
                _ => {
                    return Err(Error::param(
                        "pattern",
                        format!("unexpected character {c:?}"),
                    ))
                }
            }
        }
        Ok(p)
    }
}
