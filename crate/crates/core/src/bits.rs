// SPDX-License-Identifier: Apache-2.0

//! Fixed-width bit vectors.
//!
//! Index 0 is the least significant bit. The textual form is the usual
//! MSB-first binary rendering, so `BitVector::from_u64(6, 4)` prints as
//! `0110`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitParseError {
    #[error("empty bit string")]
    Empty,
    #[error("invalid character {0:?} in bit string")]
    BadChar(char),
    #[error("invalid hex literal {0:?}")]
    BadHex(String),
    #[error("value {value:#x} does not fit in {width} bits")]
    Overflow { value: u64, width: usize },
}

#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BitVector {
    bits: Vec<bool>,
}

impl BitVector {
    pub fn zeros(width: usize) -> Self {
        Self {
            bits: vec![false; width],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Low `width` bits of `value`.
    pub fn from_u64(value: u64, width: usize) -> Self {
        let bits = (0..width)
            .map(|i| i < 64 && (value >> i) & 1 == 1)
            .collect();
        Self { bits }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn flip(&mut self, index: usize) {
        self.bits[index] = !self.bits[index];
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// Unsigned value. Bits above index 63 are ignored.
    pub fn to_u64(&self) -> u64 {
        self.bits
            .iter()
            .take(64)
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Parses either a binary string (MSB first) or a `0x`-prefixed hex
    /// literal of the requested width.
    pub fn parse_with_width(text: &str, width: usize) -> Result<Self, BitParseError> {
        let text = text.trim();
        if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
            let value = u64::from_str_radix(hex, 16)
                .map_err(|_| BitParseError::BadHex(text.to_string()))?;
            if width < 64 && value >> width != 0 {
                return Err(BitParseError::Overflow { value, width });
            }
            return Ok(Self::from_u64(value, width));
        }
        let parsed: BitVector = text.parse()?;
        if parsed.width() != width {
            let value = parsed.to_u64();
            if parsed.width() > width && (width >= 64 || value >> width != 0) {
                return Err(BitParseError::Overflow { value, width });
            }
            return Ok(Self::from_u64(value, width));
        }
        Ok(parsed)
    }
}

impl FromStr for BitVector {
    type Err = BitParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(BitParseError::Empty);
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars().rev() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => return Err(BitParseError::BadChar(other)),
            }
        }
        Ok(Self { bits })
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits.iter().rev() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

/// MSB-first binary rendering of the low `width` bits of `value`.
pub fn format_bits(value: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|i| if (value >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_msb_first() {
        let v = BitVector::from_u64(6, 4);
        assert_eq!(v.to_string(), "0110");
        assert!(!v.get(0));
        assert!(v.get(1));
        assert_eq!(v.to_u64(), 6);
        assert_eq!(format_bits(6, 4), "0110");
    }

    #[test]
    fn parse_binary_and_hex() {
        let v: BitVector = "1010".parse().unwrap();
        assert_eq!(v.to_u64(), 10);
        assert_eq!(v.width(), 4);
        let h = BitVector::parse_with_width("0xa", 5).unwrap();
        assert_eq!(h.to_string(), "01010");
        assert!(BitVector::parse_with_width("0x20", 5).is_err());
        assert!(BitVector::parse_with_width("10a", 3).is_err());
        // short binary strings are zero-extended
        assert_eq!(
            BitVector::parse_with_width("11", 4).unwrap().to_string(),
            "0011"
        );
    }
}
