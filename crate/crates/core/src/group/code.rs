use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Maximum supported encoding length in bits.
pub const MAX_ENCODING_BITS: u32 = 128;

/// Opaque encoding of one group element.
///
/// A code is a bitstring of the owning group's encoding length `n`; the value
/// is stored right-aligned, so every valid code is `< 2^n`. Codes travel over
/// the wire as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ElementCode(u128);

impl ElementCode {
    pub const fn from_bits(bits: u128) -> Self {
        ElementCode(bits)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    /// Whether the code fits in `n` bits.
    pub fn fits(self, n: u32) -> bool {
        n >= MAX_ENCODING_BITS || self.0 >> n == 0
    }

    /// Zero-padded binary rendering of length `n`.
    pub fn to_bitstring(self, n: u32) -> String {
        format!("{:0width$b}", self.0, width = n as usize)
    }
}

impl fmt::Debug for ElementCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ElementCode({:#x})", self.0)
    }
}

impl fmt::Display for ElementCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

impl FromStr for ElementCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s.len() > 32 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("invalid element code {s:?}"));
        }
        u128::from_str_radix(s, 16).map(ElementCode).map_err(|e| format!("invalid element code {s:?}: {e}"))
    }
}

impl Serialize for ElementCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        let c = ElementCode::from_bits(0xdead_beef);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, "\"deadbeef\"");
        let back: ElementCode = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_non_hex() {
        assert!("".parse::<ElementCode>().is_err());
        assert!("xyz".parse::<ElementCode>().is_err());
        assert!("-1".parse::<ElementCode>().is_err());
        assert!(serde_json::from_str::<ElementCode>("12").is_err());
    }

    #[test]
    fn fits_and_bitstring() {
        let c = ElementCode::from_bits(5);
        assert!(c.fits(3));
        assert!(!c.fits(2));
        assert!(ElementCode::from_bits(u128::MAX).fits(128));
        assert_eq!(c.to_bitstring(6), "000101");
    }
}
