//! Marker-prefixed integer encoding of bounded-length words.
//!
//! A word `a` of length `k <= K` becomes `sum(a_i * 2^i) + 2^k`: the extra
//! high-order 1 marks where the word ends, so every word of length up to
//! `K` gets a distinct value in `[1, 2^(K+1))`. Zero encodes nothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{Word, DEFAULT_MAX_LEN};

/// Largest `K` whose register image `2^(K+2)` still fits a `u64`.
pub const MAX_ENCODABLE_LEN: usize = 62;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("word of length {len} exceeds the bound K = {k}")]
    WordTooLong { len: usize, k: usize },
    #[error("value has no marker bit")]
    NoMarker,
    #[error("value {value} does not fit in K + 1 = {} bits", .k + 1)]
    OutOfRange { value: u64, k: usize },
    #[error("length bound {k} exceeds the maximum of {max}")]
    BoundTooLarge { k: usize, max: usize },
}

/// A `K+1`-bit encoded input. Value 0 is the one member that encodes no word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EncodedInput {
    value: u64,
    k: usize,
}

impl EncodedInput {
    pub fn new(value: u64, k: usize) -> Result<Self, CodecError> {
        check_bound(k, MAX_ENCODABLE_LEN)?;
        if value >> (k + 1) != 0 {
            return Err(CodecError::OutOfRange { value, k });
        }
        Ok(Self { value, k })
    }

    /// The all-zero value, which no word maps to.
    pub fn invalid(k: usize) -> Self {
        Self { value: 0, k }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn k(self) -> usize {
        self.k
    }

    pub fn is_word(self) -> bool {
        self.value != 0
    }
}

/// Register widths of a compiled machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSpec {
    /// `K + 2`: the encoded input plus the cleared low bit.
    pub input_width: u32,
    pub output_width: u32,
    pub node_width: u32,
}

impl RegisterSpec {
    pub fn total_bits(&self) -> u32 {
        self.input_width + self.output_width + self.node_width
    }
}

fn check_bound(k: usize, max: usize) -> Result<(), CodecError> {
    if k > max {
        Err(CodecError::BoundTooLarge { k, max })
    } else {
        Ok(())
    }
}

pub fn encode(word: &Word, k: usize) -> Result<EncodedInput, CodecError> {
    check_bound(k, MAX_ENCODABLE_LEN)?;
    if word.len() > k {
        return Err(CodecError::WordTooLong { len: word.len(), k });
    }
    let payload = word
        .bits()
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
    Ok(EncodedInput {
        value: payload | (1 << word.len()),
        k,
    })
}

/// Strips the highest set bit; the bits below it are `a_0..a_(k-1)`.
pub fn decode(value: u64, k: usize) -> Result<Word, CodecError> {
    let input = EncodedInput::new(value, k)?;
    decode_input(input)
}

pub fn decode_input(input: EncodedInput) -> Result<Word, CodecError> {
    if input.value == 0 {
        return Err(CodecError::NoMarker);
    }
    let len = 63 - input.value.leading_zeros() as usize;
    Ok(Word::from_low_bits(input.value, len))
}

/// Input register image: the encoding shifted up one place, low bit clear.
pub fn initial_register(input: EncodedInput) -> u64 {
    input.value << 1
}

/// Inverse of [`initial_register`] for any register whose low bit is clear.
pub fn input_from_register(register: u64, k: usize) -> Result<EncodedInput, CodecError> {
    EncodedInput::new(register >> 1, k)
}

/// Every valid encoding with its word, ascending by value.
pub fn enumerate_inputs(k: usize) -> Result<Vec<(EncodedInput, Word)>, CodecError> {
    check_bound(k, DEFAULT_MAX_LEN)?;
    (1..1u64 << (k + 1))
        .map(|value| {
            let input = EncodedInput { value, k };
            decode_input(input).map(|w| (input, w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(&Word::empty(), 3).unwrap().value(), 1);
        assert_eq!(encode(&w("1"), 3).unwrap().value(), 3);
        assert_eq!(encode(&w("01"), 3).unwrap().value(), 6);
        assert_eq!(
            encode(&w("0101"), 3),
            Err(CodecError::WordTooLong { len: 4, k: 3 })
        );
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode(1, 3).unwrap(), Word::empty());
        assert_eq!(decode(6, 3).unwrap(), w("01"));
        assert_eq!(decode(0, 3), Err(CodecError::NoMarker));
        assert_eq!(
            decode(0, 3).unwrap_err().to_string(),
            "value has no marker bit"
        );
        assert_eq!(
            decode(16, 3),
            Err(CodecError::OutOfRange { value: 16, k: 3 })
        );
    }

    #[test]
    fn register_layout() {
        let k1 = |v| EncodedInput::new(v, 1).unwrap();
        assert_eq!(initial_register(k1(3)), 0b110);
        assert_eq!(initial_register(k1(1)), 0b10);
        assert_eq!(initial_register(EncodedInput::invalid(1)), 0);
        assert_eq!(input_from_register(0b110, 1).unwrap(), k1(3));
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(
            enumerate_inputs(0).unwrap(),
            vec![(EncodedInput { value: 1, k: 0 }, Word::empty())]
        );
        let k2: Vec<(u64, String)> = enumerate_inputs(2)
            .unwrap()
            .into_iter()
            .map(|(e, w)| (e.value(), w.to_string()))
            .collect();
        let expected = [
            (1, "ε"),
            (2, "0"),
            (3, "1"),
            (4, "00"),
            (5, "10"),
            (6, "01"),
            (7, "11"),
        ];
        assert_eq!(
            k2,
            expected
                .iter()
                .map(|&(v, s)| (v, s.to_string()))
                .collect::<Vec<_>>()
        );
        assert_eq!(enumerate_inputs(10).unwrap().len(), 2047);
        assert!(enumerate_inputs(17).is_err());
    }
}
