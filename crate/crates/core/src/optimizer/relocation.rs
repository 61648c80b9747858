use serde::{Deserialize, Serialize};

use crate::bitmap::CompressedBitmap;
use crate::catalog::project_key;
use crate::error::{Error, Result};
use crate::fragmodel::PartitionSchema;
use crate::stats::DatasetStats;

/// Tuples (and bytes, from parent widths) written to a new location when
/// moving from one schema to another.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Relocation {
    pub tuples: u64,
    pub bytes: f64,
}

/// Greedy one-to-one matching of new fragments to old fragment files by
/// descending overlap; every tuple not covered by its fragment's retained
/// file is relocated.
pub fn relocation_cost(old: &PartitionSchema, new: &PartitionSchema, stats: &DatasetStats) -> Result<Relocation> {
    let mut total = Relocation::default();
    for (rel, ns) in &new.relations {
        let os = old.scheme(rel).ok_or_else(|| {
            Error::Consistency(format!("relation '{rel}' is missing from the current schema"))
        })?;
        let rs = stats.relation(rel)?;
        let rows = |pset, key| -> Result<CompressedBitmap> { Ok(rs.tuples.rows(&project_key(rs, pset, key)?)) };
        let old_rows: Vec<CompressedBitmap> = os.fragments.iter().map(|f| rows(&os.pset, &f.key)).collect::<Result<_>>()?;
        let new_rows: Vec<CompressedBitmap> = ns.fragments.iter().map(|f| rows(&ns.pset, &f.key)).collect::<Result<_>>()?;
        if let (Some(a), Some(b)) = (old_rows.first(), new_rows.first()) {
            if a.universe() != b.universe() {
                return Err(Error::Consistency(format!("'{rel}': row universes differ")));
            }
        }
        let mut pairs: Vec<(u64, usize, usize)> = Vec::new();
        for (i, n) in new_rows.iter().enumerate() {
            for (j, o) in old_rows.iter().enumerate() {
                let ov = n.and_len(o);
                if ov > 0 {
                    pairs.push((ov, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut retained = vec![0u64; new_rows.len()];
        let mut new_used = vec![false; new_rows.len()];
        let mut old_used = vec![false; old_rows.len()];
        for (ov, i, j) in pairs {
            if !new_used[i] && !old_used[j] {
                new_used[i] = true;
                old_used[j] = true;
                retained[i] = ov;
            }
        }
        let moved: u64 = new_rows.iter().zip(&retained).map(|(n, r)| n.len() - r).sum();
        let width: f64 = rs.parent.attributes.iter().map(|a| a.width).sum();
        total.tuples += moved;
        total.bytes += moved as f64 * width;
    }
    Ok(total)
}
