//! Statistics artifacts: parent statistics, the finest-granularity histogram,
//! bitmap indexes and every per-fragment derivation built on them.

mod derive;
mod index;
mod parent;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use derive::{
    derive_histogram, derive_mcv, derive_stadistinct, derive_width, FragmentStats, RelationStats,
};
pub use index::{
    aggregate_cells, build_bitmap_indexes, build_mdh, derive_distinct_count, fragment_cardinality,
    AttrValueIndex, CellRecord, Mdh, TupleEncodedIndex, ValueEncodedIndex,
};
pub use parent::{
    build_parent_stats, column_stats, decode_stadistinct, encode_stadistinct, pages_for,
    AttrStats, ParentStats, DEFAULT_STATS_TARGET,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fragmodel::StarSchemaDef;
use crate::workload::PredicateSet;

const SNAPSHOT_MAGIC: &[u8; 6] = b"PHMDH1";
const SNAPSHOT_VERSION: u32 = 1;

/// Statistics artifacts of every relation of a dataset. In star mode the
/// fact's predicate set is the concatenation of the dimension sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Bumped by every rebuild; catalog stores remember the epoch they were
    /// derived from.
    pub epoch: u64,
    pub target: usize,
    pub relations: BTreeMap<String, RelationStats>,
}

impl DatasetStats {
    /// Builds artifacts for every relation, in parallel across relations.
    /// Relations missing from `psets` get an empty predicate set.
    pub fn build(dataset: &Dataset, psets: &BTreeMap<String, PredicateSet>, target: usize) -> Result<Self> {
        let psets = effective_psets(dataset, psets);
        let built: Vec<(String, RelationStats)> = psets
            .par_iter()
            .map(|(name, pset)| Ok((name.clone(), RelationStats::build(dataset, name, pset, target)?)))
            .collect::<Result<_>>()?;
        Ok(DatasetStats {
            epoch: 1,
            target,
            relations: built.into_iter().collect(),
        })
    }

    pub fn relation(&self, name: &str) -> Result<&RelationStats> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::Config(format!("no statistics for relation '{name}'")))
    }

    pub fn psets(&self) -> BTreeMap<String, PredicateSet> {
        self.relations
            .iter()
            .map(|(n, s)| (n.clone(), s.pset.clone()))
            .collect()
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = std::io::BufWriter::new(file);
        w.write_all(SNAPSHOT_MAGIC)
            .and_then(|_| w.write_all(&SNAPSHOT_VERSION.to_le_bytes()))
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        bincode::serialize_into(&mut w, self)
            .map_err(|e| Error::Consistency(format!("snapshot encoding: {e}")))?;
        w.flush()
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut r = std::io::BufReader::new(file);
        let mut head = [0u8; 10];
        r.read_exact(&mut head)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if &head[..6] != SNAPSHOT_MAGIC {
            return Err(Error::Config(format!("{} is not a statistics snapshot", path.display())));
        }
        let version = u32::from_le_bytes(head[6..].try_into().expect("4 bytes"));
        if version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!(
                "snapshot version {version} is not supported (expected {SNAPSHOT_VERSION})"
            )));
        }
        let mut stats: DatasetStats = bincode::deserialize_from(&mut r)
            .map_err(|e| Error::Consistency(format!("snapshot decoding: {e}")))?;
        for s in stats.relations.values_mut() {
            s.freeze();
        }
        Ok(stats)
    }
}

/// Per-relation predicate sets actually indexed: every relation gets one,
/// and in star mode the fact's set is lifted from its dimensions.
pub fn effective_psets(dataset: &Dataset, psets: &BTreeMap<String, PredicateSet>) -> BTreeMap<String, PredicateSet> {
    let star = StarSchemaDef::from_schema_def(&dataset.schema);
    dataset
        .schema
        .relations
        .iter()
        .map(|r| {
            let pset = match &star {
                Some(s) if s.fact == r.name => s.lifted_pset(psets),
                _ => psets
                    .get(&r.name)
                    .cloned()
                    .unwrap_or_else(|| PredicateSet::new(r.name.clone())),
            };
            (r.name.clone(), pset)
        })
        .collect()
}
