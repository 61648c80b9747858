//! Simulated catalog records per fragment and their export as a SQL script.

mod export;
mod layout;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{export_catalog_script, parse_catalog_script};
pub use layout::PageLayout;

use crate::error::{Error, Result};
use crate::fragmodel::{FragmentKey, PartitionSchema};
use crate::stats::{DatasetStats, FragmentStats, ParentStats, RelationStats, TupleEncodedIndex};
use crate::value::Value;
use crate::workload::PredicateSet;

/// The analog of one row of the relation catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCatalogRecord {
    pub fragment: String,
    pub relation: String,
    pub reltuples: u64,
    pub relpages: u64,
}

/// The analog of one row of the attribute statistics catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCatalogRecord {
    pub fragment: String,
    pub attribute: String,
    pub stadistinct: f64,
    pub width: f64,
    pub mcv_values: Vec<Value>,
    pub mcv_freqs: Vec<f64>,
    pub histogram: Option<Vec<Value>>,
}

impl AttributeCatalogRecord {
    /// Distinct count implied by the signed encoding.
    pub fn distinct(&self, reltuples: f64) -> f64 {
        crate::stats::decode_stadistinct(self.stadistinct, reltuples)
    }
}

/// Catalog records of every fragment of a schema. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogStore {
    /// Epoch of the statistics the records were derived from.
    pub epoch: u64,
    pub relations: BTreeMap<String, RelationCatalogRecord>,
    pub attributes: BTreeMap<String, BTreeMap<String, AttributeCatalogRecord>>,
}

impl CatalogStore {
    pub fn relation(&self, fragment: &str) -> Option<&RelationCatalogRecord> {
        self.relations.get(fragment)
    }

    pub fn attribute(&self, fragment: &str, attribute: &str) -> Option<&AttributeCatalogRecord> {
        self.attributes.get(fragment)?.get(attribute)
    }

    pub fn insert(&mut self, rel: RelationCatalogRecord, attrs: Vec<AttributeCatalogRecord>) {
        let map = self.attributes.entry(rel.fragment.clone()).or_default();
        map.clear();
        for a in attrs {
            map.insert(a.attribute.clone(), a);
        }
        self.relations.insert(rel.fragment.clone(), rel);
    }

    pub fn remove(&mut self, fragment: &str) {
        self.relations.remove(fragment);
        self.attributes.remove(fragment);
    }

    /// Fails when the store was derived from older statistics.
    pub fn ensure_current(&self, stats: &DatasetStats) -> Result<()> {
        if self.epoch != stats.epoch {
            return Err(Error::Stale(format!(
                "catalog derived from statistics epoch {}, current epoch is {}",
                self.epoch, stats.epoch
            )));
        }
        Ok(())
    }

    /// Checks that every fragment of `schema` has its relation record and
    /// one attribute record per attribute.
    pub fn check_complete(&self, schema: &PartitionSchema, stats: &DatasetStats) -> Result<()> {
        for (rel, f) in schema.fragments() {
            if !self.relations.contains_key(&f.id) {
                return Err(Error::Consistency(format!("no relation record for '{}'", f.id)));
            }
            for a in &stats.relation(rel)?.def.attributes {
                if self.attribute(&f.id, &a.name).is_none() {
                    return Err(Error::Consistency(format!(
                        "no attribute record for '{}.{}'",
                        f.id, a.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Exact fragment cardinality from tuple-encoded bitmaps.
pub fn derive_reltuples(key: &FragmentKey, tuples: &TupleEncodedIndex) -> Result<u64> {
    crate::stats::fragment_cardinality(key, tuples)
}

/// Page count of a fragment: the page formula over derived widths when any
/// attribute is variable-length, the parent's pages scaled by cardinality
/// when all are fixed.
pub fn derive_relpages(
    widths: &[f64],
    reltuples: u64,
    parent: &ParentStats,
    all_fixed: bool,
    layout: &PageLayout,
) -> Result<u64> {
    let width_sum: f64 = widths.iter().sum();
    layout.tuples_per_page(width_sum)?;
    if reltuples == 0 {
        return Ok(0);
    }
    if all_fixed {
        if parent.tuples == 0 {
            return Ok(0);
        }
        return Ok((parent.pages * reltuples).div_ceil(parent.tuples));
    }
    layout.pages_for(reltuples, width_sum)
}

/// Which attributes get full statistics per relation; widths, cardinalities
/// and page counts are always derived. `None` means every attribute.
pub type AttributeScope = BTreeMap<String, Vec<usize>>;

/// Maps a key over `pset` to the statistics' predicate set, which must
/// contain every predicate of `pset`. Missing positions become digit 2.
pub fn project_key(stats: &RelationStats, pset: &PredicateSet, key: &FragmentKey) -> Result<FragmentKey> {
    if pset == &stats.pset {
        return Ok(key.clone());
    }
    let mut digits = vec![2u8; stats.pset.m()];
    for (p, d) in pset.iter().zip(key.digits()) {
        let pos = stats.pset.position(p).ok_or_else(|| {
            Error::Config(format!(
                "statistics of '{}' were not built for predicate {p}; rebuild them",
                stats.relation()
            ))
        })?;
        digits[pos] = *d;
    }
    FragmentKey::new(digits)
}

fn fragment_records(
    id: &str,
    rs: &RelationStats,
    derived: &FragmentStats,
    layout: &PageLayout,
) -> Result<(RelationCatalogRecord, Vec<AttributeCatalogRecord>)> {
    let relpages = derive_relpages(
        &derived.widths,
        derived.reltuples,
        &rs.parent,
        rs.def.all_fixed(),
        layout,
    )?;
    let rel = RelationCatalogRecord {
        fragment: id.to_string(),
        relation: rs.relation().to_string(),
        reltuples: derived.reltuples,
        relpages,
    };
    let attrs = derived
        .attributes
        .iter()
        .flatten()
        .map(|a| AttributeCatalogRecord {
            fragment: id.to_string(),
            attribute: a.attribute.clone(),
            stadistinct: a.stadistinct,
            width: a.width,
            mcv_values: a.mcv_values.clone(),
            mcv_freqs: a.mcv_freqs.clone(),
            histogram: a.histogram.clone(),
        })
        .collect();
    Ok((rel, attrs))
}

/// Records for one fragment of `relation`.
pub fn derive_fragment_records(
    relation: &str,
    id: &str,
    pset: &PredicateSet,
    key: &FragmentKey,
    stats: &DatasetStats,
    scope: Option<&[usize]>,
) -> Result<(RelationCatalogRecord, Vec<AttributeCatalogRecord>)> {
    let rs = stats.relation(relation)?;
    let k = project_key(rs, pset, key)?;
    let derived = rs.derive(&k, scope)?;
    fragment_records(id, rs, &derived, &PageLayout::default())
}

/// Derives the full catalog of a schema without touching base tuples.
pub fn populate_catalog(schema: &PartitionSchema, stats: &DatasetStats) -> Result<CatalogStore> {
    populate_catalog_scoped(schema, stats, None)
}

/// As [`populate_catalog`], with full attribute statistics restricted to
/// `scope` (relations absent from a given scope get none).
pub fn populate_catalog_scoped(
    schema: &PartitionSchema,
    stats: &DatasetStats,
    scope: Option<&AttributeScope>,
) -> Result<CatalogStore> {
    let jobs: Vec<(&str, &PredicateSet, &str, &FragmentKey)> = schema
        .relations
        .iter()
        .flat_map(|(rel, s)| s.fragments.iter().map(move |f| (rel.as_str(), &s.pset, f.id.as_str(), &f.key)))
        .collect();
    let records: Vec<_> = jobs
        .par_iter()
        .map(|(rel, pset, id, key)| {
            let sc = scope.map(|s| s.get(*rel).map_or(&[][..], Vec::as_slice));
            derive_fragment_records(rel, id, pset, key, stats, sc)
        })
        .collect::<Result<_>>()?;
    let mut store = CatalogStore {
        epoch: stats.epoch,
        ..Default::default()
    };
    for (rel, attrs) in records {
        store.insert(rel, attrs);
    }
    Ok(store)
}

/// Re-derives records of the listed fragments of `schema`, drops records of
/// fragments no longer in it and keeps every other record untouched.
pub fn refresh_catalog(
    store: &CatalogStore,
    schema: &PartitionSchema,
    stats: &DatasetStats,
    affected: &BTreeSet<String>,
) -> Result<CatalogStore> {
    let mut out = store.clone();
    out.epoch = stats.epoch;
    let live: BTreeSet<&str> = schema.fragments().map(|(_, f)| f.id.as_str()).collect();
    let stale: Vec<String> = out
        .relations
        .keys()
        .filter(|id| !live.contains(id.as_str()))
        .cloned()
        .collect();
    for id in stale {
        out.remove(&id);
    }
    for (rel, s) in &schema.relations {
        for f in &s.fragments {
            if affected.contains(&f.id) || !out.relations.contains_key(&f.id) {
                let (r, a) = derive_fragment_records(rel, &f.id, &s.pset, &f.key, stats, None)?;
                out.insert(r, a);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relpages_examples() {
        let layout = PageLayout::default();
        let parent = ParentStats {
            relation: "r".into(),
            tuples: 6,
            pages: 12,
            attributes: vec![],
        };
        assert_eq!(derive_relpages(&[100.0], 1000, &parent, false, &layout).unwrap(), 14);
        assert_eq!(derive_relpages(&[4.0], 2, &parent, true, &layout).unwrap(), 4);
        assert_eq!(derive_relpages(&[4.0], 0, &parent, true, &layout).unwrap(), 0);
        assert!(derive_relpages(&[9000.0], 1, &parent, false, &layout).is_err());
    }
}
