//! Compressed bitmaps with an explicit universe, so complements are bounded.

use roaring::RoaringBitmap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedBitmap {
    universe: u32,
    bits: RoaringBitmap,
}

impl CompressedBitmap {
    pub fn empty(universe: u32) -> Self {
        CompressedBitmap {
            universe,
            bits: RoaringBitmap::new(),
        }
    }

    pub fn full(universe: u32) -> Self {
        let mut bits = RoaringBitmap::new();
        bits.insert_range(0..universe);
        CompressedBitmap { universe, bits }
    }

    /// Builds from members; members outside the universe are rejected.
    pub fn from_members<I: IntoIterator<Item = u32>>(universe: u32, members: I) -> Result<Self> {
        let mut b = CompressedBitmap::empty(universe);
        for m in members {
            if m >= universe {
                return Err(Error::Consistency(format!(
                    "bit {m} outside universe of {universe}"
                )));
            }
            b.bits.insert(m);
        }
        Ok(b)
    }

    pub fn universe(&self) -> u32 {
        self.universe
    }

    /// Sets `bit`; panics if it lies outside the universe.
    pub fn insert(&mut self, bit: u32) {
        assert!(bit < self.universe, "bit {bit} outside universe {}", self.universe);
        self.bits.insert(bit);
    }

    pub fn contains(&self, bit: u32) -> bool {
        self.bits.contains(bit)
    }

    pub fn len(&self) -> u64 {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.bits.len() == self.universe as u64
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.bits.iter()
    }

    fn check_universe(&self, other: &Self) {
        assert_eq!(
            self.universe, other.universe,
            "bitmap universes differ ({} vs {})",
            self.universe, other.universe
        );
    }

    pub fn and(&self, other: &Self) -> Self {
        self.check_universe(other);
        CompressedBitmap {
            universe: self.universe,
            bits: &self.bits & &other.bits,
        }
    }

    pub fn or(&self, other: &Self) -> Self {
        self.check_universe(other);
        CompressedBitmap {
            universe: self.universe,
            bits: &self.bits | &other.bits,
        }
    }

    pub fn and_not(&self, other: &Self) -> Self {
        self.check_universe(other);
        CompressedBitmap {
            universe: self.universe,
            bits: &self.bits - &other.bits,
        }
    }

    pub fn and_inplace(&mut self, other: &Self) {
        self.check_universe(other);
        self.bits &= &other.bits;
    }

    pub fn and_not_inplace(&mut self, other: &Self) {
        self.check_universe(other);
        self.bits -= &other.bits;
    }

    pub fn or_inplace(&mut self, other: &Self) {
        self.check_universe(other);
        self.bits |= &other.bits;
    }

    /// Complement within the declared universe.
    pub fn not(&self) -> Self {
        CompressedBitmap::full(self.universe).and_not(self)
    }

    pub fn and_len(&self, other: &Self) -> u64 {
        self.check_universe(other);
        self.bits.intersection_len(&other.bits)
    }

    pub fn and_not_len(&self, other: &Self) -> u64 {
        self.check_universe(other);
        self.bits.difference_len(&other.bits)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.bits.is_disjoint(&other.bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_bounded() {
        let b = CompressedBitmap::from_members(6, [0, 1, 2]).unwrap();
        let n = b.not();
        assert_eq!(n.iter().collect::<Vec<_>>(), vec![3, 4, 5]);
        assert_eq!(b.and(&n).len(), 0);
        assert!(b.or(&n).is_full());
        assert_eq!(CompressedBitmap::full(0).len(), 0);
        assert!(CompressedBitmap::from_members(3, [3]).is_err());
    }

    #[test]
    fn counting_ops() {
        let a = CompressedBitmap::from_members(10, [1, 3, 5, 7]).unwrap();
        let b = CompressedBitmap::from_members(10, [3, 4, 5]).unwrap();
        assert_eq!(a.and_len(&b), 2);
        assert_eq!(a.and_not_len(&b), 2);
        assert_eq!(a.and_not(&b).iter().collect::<Vec<_>>(), vec![1, 7]);
    }
}
