//! Message bit vectors and their text forms.
//!
//! Hex strings are read most significant bit first, four bits per digit;
//! explicit bit strings use `0`/`1` characters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Parses a hex string (optional `0x` prefix) into `4·len` bits.
pub fn from_hex(s: &str) -> Result<Vec<bool>> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty message".into()));
    }
    let mut bits = Vec::with_capacity(4 * s.len());
    for c in s.chars() {
        let d = c
            .to_digit(16)
            .ok_or_else(|| Error::InvalidArgument(format!("invalid hex digit `{c}`")))?;
        bits.extend((0..4).rev().map(|k| d >> k & 1 == 1));
    }
    Ok(bits)
}

/// Parses an explicit `0`/`1` string.
pub fn from_bit_string(s: &str) -> Result<Vec<bool>> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty message".into()));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::InvalidArgument(format!("invalid bit `{c}`"))),
        })
        .collect()
}

/// Accepts `b:0101…`, `0x…`, or plain hex.
pub fn parse(s: &str) -> Result<Vec<bool>> {
    match s.strip_prefix("b:") {
        Some(bits) => from_bit_string(bits),
        None => from_hex(s),
    }
}

/// Hex form, the last digit padded with zero bits on the right.
pub fn to_hex(bits: &[bool]) -> String {
    bits.chunks(4)
        .map(|c| {
            let d = (0..4).fold(0u32, |acc, k| acc << 1 | c.get(k).copied().unwrap_or(false) as u32);
            char::from_digit(d, 16).unwrap()
        })
        .collect()
}

pub fn to_bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn random(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_is_msb_first() {
        assert_eq!(to_bit_string(&from_hex("a5").unwrap()), "10100101");
        assert_eq!(from_hex("0x1").unwrap(), vec![false, false, false, true]);
        assert_eq!(to_hex(&from_bit_string("101").unwrap()), "a");
        assert!(from_hex("xyz").is_err());
        assert!(from_bit_string("012").is_err());
        assert_eq!(parse("b:11").unwrap(), vec![true, true]);
    }

    proptest! {
        #[test]
        fn hex_round_trip(bytes in proptest::collection::vec(any::<u8>(), 1..8)) {
            let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
            prop_assert_eq!(to_hex(&from_hex(&hex).unwrap()), hex);
        }
    }
}
