use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicates per relation are capped so cells and keys fit a `u128` mask.
pub const MAX_PREDICATES: usize = 128;

/// One finest-granularity region: bit `i` is the truth value of predicate `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub bits: u128,
    pub len: u8,
}

impl Cell {
    pub fn new(bits: u128, len: usize) -> Self {
        debug_assert!(len <= MAX_PREDICATES);
        debug_assert!(len == 128 || bits >> len == 0);
        Cell {
            bits,
            len: len as u8,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = 0u128;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v |= 1 << i;
            }
        }
        Cell::new(v, bits.len())
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    /// Concatenation; `other`'s positions follow this cell's.
    pub fn concat(&self, other: &Cell) -> Cell {
        let len = self.len() + other.len();
        assert!(len <= MAX_PREDICATES, "concatenated cell too long");
        Cell::new(self.bits | other.bits << self.len(), len)
    }

    /// The sub-cell at positions `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Cell {
        let mask = if len == 128 { u128::MAX } else { (1u128 << len) - 1 };
        Cell::new(self.bits >> start & mask, len)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return f.write_str("()");
        }
        for i in 0..self.len() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Ternary fragment key: digit 0 selects the negation of the aligned
/// predicate, 1 the predicate itself and 2 leaves it unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FragmentKey {
    digits: Vec<u8>,
    care: u128,
    value: u128,
}

impl FragmentKey {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if digits.len() > MAX_PREDICATES {
            return Err(Error::Unsupported(format!(
                "fragment key of {} digits exceeds {MAX_PREDICATES}",
                digits.len()
            )));
        }
        let (mut care, mut value) = (0u128, 0u128);
        for (i, &d) in digits.iter().enumerate() {
            match d {
                0 => care |= 1 << i,
                1 => {
                    care |= 1 << i;
                    value |= 1 << i;
                }
                2 => {}
                _ => return Err(Error::Config(format!("invalid key digit {d}"))),
            }
        }
        Ok(FragmentKey {
            digits,
            care,
            value,
        })
    }

    /// The key that covers every cell of an `m`-predicate set.
    pub fn all_two(m: usize) -> Self {
        FragmentKey::new(vec![2; m]).expect("valid digits")
    }

    /// The finest key selecting exactly `cell`.
    pub fn from_cell(cell: &Cell) -> Self {
        FragmentKey::new((0..cell.len()).map(|i| cell.bit(i) as u8).collect())
            .expect("valid digits")
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Mask of constrained positions.
    pub fn care_mask(&self) -> u128 {
        self.care
    }

    /// Mask of positions required to be 1.
    pub fn value_mask(&self) -> u128 {
        self.value
    }

    pub fn is_binary(&self) -> bool {
        self.digits.iter().all(|&d| d != 2)
    }

    pub fn covers(&self, cell: &Cell) -> Result<bool> {
        if cell.len() != self.len() {
            return Err(Error::Consistency(format!(
                "key {self} and cell {cell} have different lengths"
            )));
        }
        Ok(self.covers_unchecked(cell))
    }

    #[inline]
    pub fn covers_unchecked(&self, cell: &Cell) -> bool {
        cell.bits & self.care == self.value
    }

    /// True when every cell covered by `other` is also covered by `self`.
    pub fn subsumes(&self, other: &FragmentKey) -> bool {
        self.care & other.care == self.care && other.value & self.care == self.value
    }

    /// Whether some cell is covered by both keys (ignoring satisfiability).
    pub fn intersects(&self, other: &FragmentKey) -> bool {
        let both = self.care & other.care;
        self.value & both == other.value & both
    }

    /// Most specific key covering both: differing positions become 2.
    pub fn generalize(&self, other: &FragmentKey) -> FragmentKey {
        assert_eq!(self.len(), other.len());
        let digits = self
            .digits
            .iter()
            .zip(&other.digits)
            .map(|(&a, &b)| if a == b { a } else { 2 })
            .collect();
        FragmentKey::new(digits).expect("valid digits")
    }

    pub fn with_digit(&self, pos: usize, digit: u8) -> FragmentKey {
        let mut digits = self.digits.clone();
        digits[pos] = digit;
        FragmentKey::new(digits).expect("valid digits")
    }

    pub fn concat(parts: &[&FragmentKey]) -> Result<FragmentKey> {
        FragmentKey::new(parts.iter().flat_map(|k| k.digits.iter().copied()).collect())
    }

    pub fn slice(&self, start: usize, len: usize) -> FragmentKey {
        FragmentKey::new(self.digits[start..start + len].to_vec()).expect("valid digits")
    }

    /// Inserts a digit at `pos`, shifting later positions right.
    pub fn insert_digit(&self, pos: usize, digit: u8) -> Result<FragmentKey> {
        let mut digits = self.digits.clone();
        digits.insert(pos, digit);
        FragmentKey::new(digits)
    }

    /// Drops the digit at `pos`.
    pub fn remove_digit(&self, pos: usize) -> FragmentKey {
        let mut digits = self.digits.clone();
        digits.remove(pos);
        FragmentKey::new(digits).expect("valid digits")
    }
}

impl fmt::Display for FragmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for FragmentKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                '2' => Ok(2),
                other => Err(Error::Config(format!("invalid key digit '{other}' in '{s}'"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        FragmentKey::new(digits)
    }
}

impl From<FragmentKey> for String {
    fn from(k: FragmentKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for FragmentKey {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Whether `key` covers `cell`; errors on a length mismatch.
pub fn key_covers(key: &FragmentKey, cell: &Cell) -> Result<bool> {
    key.covers(cell)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(s: &str) -> FragmentKey {
        s.parse().unwrap()
    }

    fn c(s: &str) -> Cell {
        Cell::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn covering() {
        assert!(k("21").covers(&c("01")).unwrap());
        assert!(!k("21").covers(&c("10")).unwrap());
        assert!(k("11").covers(&c("11")).unwrap());
        assert!(k("2").covers(&c("10")).is_err());
    }

    #[test]
    fn algebra() {
        assert_eq!(k("10").generalize(&k("11")), k("12"));
        assert!(k("12").subsumes(&k("11")));
        assert!(!k("11").subsumes(&k("12")));
        assert!(k("12").intersects(&k("21")));
        assert!(!k("12").intersects(&k("02")));
        let cat = FragmentKey::concat(&[&k("1"), &k("20")]).unwrap();
        assert_eq!(cat, k("120"));
        assert_eq!(cat.slice(1, 2), k("20"));
        assert_eq!(c("10").concat(&c("01")).to_string(), "1001");
        assert_eq!(c("1001").slice(2, 2).to_string(), "01");
        assert!("13".parse::<FragmentKey>().is_err());
    }
}
