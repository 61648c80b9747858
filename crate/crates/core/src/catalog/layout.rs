use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Heap page geometry of the reference DBMS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageLayout {
    pub block_bytes: u32,
    pub header_bytes: u32,
    /// Line pointer plus offset entry per tuple.
    pub per_tuple_overhead: u32,
}

impl Default for PageLayout {
    fn default() -> Self {
        PageLayout {
            block_bytes: 8192,
            header_bytes: 24,
            per_tuple_overhead: 8,
        }
    }
}

impl PageLayout {
    pub fn usable_bytes(&self) -> u32 {
        self.block_bytes - self.header_bytes
    }

    /// Tuples that fit one page for an average tuple width of `width_sum`.
    pub fn tuples_per_page(&self, width_sum: f64) -> Result<u64> {
        let tuple = self.per_tuple_overhead as f64 + width_sum;
        let usable = self.usable_bytes();
        if tuple > usable as f64 {
            return Err(Error::OversizedTuple {
                bytes: tuple,
                usable,
            });
        }
        Ok((usable as f64 / tuple).floor() as u64)
    }

    /// `ceil(tuples / floor(usable / (overhead + width_sum)))`, zero for no tuples.
    pub fn pages_for(&self, tuples: u64, width_sum: f64) -> Result<u64> {
        if tuples == 0 {
            return Ok(0);
        }
        let per_page = self.tuples_per_page(width_sum)?;
        Ok(tuples.div_ceil(per_page))
    }
}
