//! Per-fragment statistics derived from parent statistics, the histogram of
//! finest granularity and the bitmap indexes, without touching base tuples.

use serde::{Deserialize, Serialize};

use super::index::{CellRecord, Mdh, TupleEncodedIndex, ValueEncodedIndex};
use super::parent::{build_parent_stats, AttrStats, ParentStats};
use crate::data::{Dataset, RelationDef};
use crate::error::{Error, Result};
use crate::fragmodel::{Cell, FragmentKey};
use crate::value::Value;
use crate::workload::PredicateSet;

/// Whether `v` satisfies every constraint `key` places on `relation.attribute`.
fn satisfies_key_on(v: &Value, key: &FragmentKey, pset: &PredicateSet, relation: &str, attribute: &str) -> bool {
    key.digits()
        .iter()
        .zip(pset.iter())
        .filter(|(d, p)| **d != 2 && p.is_on(relation, attribute))
        .all(|(d, p)| p.holds(v) == (*d == 1))
}

/// Parent boundaries that satisfy the key's constraints on this attribute;
/// fewer than two survivors means no histogram.
pub fn derive_histogram(
    parent: &[Value],
    key: &FragmentKey,
    pset: &PredicateSet,
    relation: &str,
    attribute: &str,
) -> Option<Vec<Value>> {
    let kept: Vec<Value> = parent
        .iter()
        .filter(|b| satisfies_key_on(b, key, pset, relation, attribute))
        .cloned()
        .collect();
    (kept.len() >= 2).then_some(kept)
}

/// Parent MCVs admitted by the key, re-weighted by their aggregated counts.
pub fn derive_mcv(
    parent: &AttrStats,
    key: &FragmentKey,
    pset: &PredicateSet,
    relation: &str,
    aggregated: &CellRecord,
    attr_index: usize,
    cardinality: u64,
) -> (Vec<Value>, Vec<f64>) {
    let mut values = Vec::new();
    let mut freqs = Vec::new();
    if cardinality == 0 {
        return (values, freqs);
    }
    for v in &parent.mcv_values {
        if !satisfies_key_on(v, key, pset, relation, &parent.attribute) {
            continue;
        }
        let c = aggregated.values[attr_index].get(v).copied().unwrap_or(0);
        if c > 0 {
            values.push(v.clone());
            freqs.push(c as f64 / cardinality as f64);
        }
    }
    (values, freqs)
}

/// Fixed-width attributes keep the parent width; variable-width ones are
/// recomputed from aggregated byte totals (parent width for empty fragments).
pub fn derive_width(parent_width: f64, variable: bool, total_bytes: u64, cardinality: u64) -> f64 {
    if !variable || cardinality == 0 {
        parent_width
    } else {
        total_bytes as f64 / cardinality as f64
    }
}

/// Derived signed distinct count following the parent's sign convention;
/// the estimate is capped at the fragment cardinality.
pub fn derive_stadistinct(parent_stadistinct: f64, distinct: u64, cardinality: u64) -> (f64, u64) {
    let d = distinct.min(cardinality);
    let s = if parent_stadistinct > 0.0 {
        d as f64
    } else if parent_stadistinct < 0.0 && cardinality > 0 {
        -(d as f64) / cardinality as f64
    } else {
        0.0
    };
    (s, d)
}

/// Derived statistics of one fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentStats {
    pub reltuples: u64,
    /// Widths of every attribute (needed for page counts).
    pub widths: Vec<f64>,
    /// Attribute statistics for the requested attributes, `None` elsewhere.
    pub attributes: Vec<Option<AttrStats>>,
}

#[derive(Debug, Clone, Default)]
struct CellColumns {
    cells: Vec<Cell>,
    tuples: Vec<u64>,
    /// `[attribute][cell]` summed byte lengths.
    bytes: Vec<Vec<u64>>,
    /// `[attribute][cell][mcv]` occurrence counts of parent MCVs.
    mcv: Vec<Vec<Vec<u64>>>,
}

/// Everything needed to derive fragment statistics of one relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationStats {
    pub def: RelationDef,
    pub pset: PredicateSet,
    pub parent: ParentStats,
    pub mdh: Mdh,
    pub tuples: TupleEncodedIndex,
    pub values: ValueEncodedIndex,
    #[serde(skip)]
    columns: CellColumns,
}

impl RelationStats {
    pub fn build(dataset: &Dataset, relation: &str, pset: &PredicateSet, target: usize) -> Result<Self> {
        let data = dataset.relation(relation)?;
        let parent = build_parent_stats(data, target)?;
        let tuples = TupleEncodedIndex::build(dataset, relation, pset)?;
        let mdh = Mdh::build(data, pset, &tuples)?;
        let values = ValueEncodedIndex::build(data, pset, &tuples)?;
        let mut s = RelationStats {
            def: data.def.clone(),
            pset: pset.clone(),
            parent,
            mdh,
            tuples,
            values,
            columns: CellColumns::default(),
        };
        s.freeze();
        Ok(s)
    }

    /// Rebuilds the columnar cell caches used by the fast derivation path.
    pub fn freeze(&mut self) {
        let attrs = self.def.attributes.len();
        let mut c = CellColumns {
            cells: Vec::with_capacity(self.mdh.cells.len()),
            tuples: Vec::with_capacity(self.mdh.cells.len()),
            bytes: vec![Vec::with_capacity(self.mdh.cells.len()); attrs],
            mcv: vec![Vec::with_capacity(self.mdh.cells.len()); attrs],
        };
        for (cell, rec) in &self.mdh.cells {
            c.cells.push(*cell);
            c.tuples.push(rec.tuples);
            for a in 0..attrs {
                c.bytes[a].push(rec.bytes[a]);
                let counts = self.parent.attributes[a]
                    .mcv_values
                    .iter()
                    .map(|v| rec.values[a].get(v).copied().unwrap_or(0))
                    .collect();
                c.mcv[a].push(counts);
            }
        }
        self.columns = c;
    }

    pub fn relation(&self) -> &str {
        &self.def.name
    }

    fn check_key(&self, key: &FragmentKey) -> Result<()> {
        if key.len() != self.pset.m() {
            return Err(Error::Consistency(format!(
                "key {key} does not match the {} predicates of '{}'",
                self.pset.m(),
                self.def.name
            )));
        }
        Ok(())
    }

    pub fn cardinality(&self, key: &FragmentKey) -> Result<u64> {
        self.check_key(key)?;
        Ok(self.tuples.cardinality(key))
    }

    /// Indices of stored cells covered by the key.
    fn covered(&self, key: &FragmentKey) -> Vec<usize> {
        self.columns
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| key.covers_unchecked(c))
            .map(|(i, _)| i)
            .collect()
    }

    /// Derives fragment statistics. `scope` restricts which attributes get
    /// full statistics; widths are always derived for every attribute.
    pub fn derive(&self, key: &FragmentKey, scope: Option<&[usize]>) -> Result<FragmentStats> {
        self.check_key(key)?;
        let card = self.tuples.cardinality(key);
        let covered = self.covered(key);
        let rel = self.def.name.as_str();
        let widths: Vec<f64> = self
            .def
            .attributes
            .iter()
            .enumerate()
            .map(|(a, def)| {
                let bytes = if def.is_variable() {
                    covered.iter().map(|&i| self.columns.bytes[a][i]).sum()
                } else {
                    0
                };
                derive_width(self.parent.attributes[a].width, def.is_variable(), bytes, card)
            })
            .collect();
        let mut attributes = vec![None; self.def.attributes.len()];
        let all: Vec<usize> = (0..self.def.attributes.len()).collect();
        for &a in scope.unwrap_or(&all) {
            let parent = &self.parent.attributes[a];
            let histogram = parent
                .histogram
                .as_ref()
                .and_then(|h| derive_histogram(h, key, &self.pset, rel, &parent.attribute));
            let (mut mcv_values, mut mcv_freqs) = (Vec::new(), Vec::new());
            if card > 0 {
                let mut counts = vec![0u64; parent.mcv_values.len()];
                for &i in &covered {
                    for (acc, c) in counts.iter_mut().zip(&self.columns.mcv[a][i]) {
                        *acc += c;
                    }
                }
                for (v, c) in parent.mcv_values.iter().zip(counts) {
                    if c > 0 && satisfies_key_on(v, key, &self.pset, rel, &parent.attribute) {
                        mcv_values.push(v.clone());
                        mcv_freqs.push(c as f64 / card as f64);
                    }
                }
            }
            let raw = self.values.attributes[a].distinct(key);
            let (stadistinct, distinct) = derive_stadistinct(parent.stadistinct, raw, card);
            attributes[a] = Some(AttrStats {
                attribute: parent.attribute.clone(),
                mcv_values,
                mcv_freqs,
                histogram,
                width: widths[a],
                stadistinct,
                distinct,
            });
        }
        Ok(FragmentStats {
            reltuples: card,
            widths,
            attributes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SchemaDef;
    use crate::stats::index::{aggregate_cells, build_bitmap_indexes, build_mdh, derive_distinct_count, fragment_cardinality};
    use crate::workload::{AtomicPredicate, CmpOp};

    fn toy() -> (Dataset, PredicateSet) {
        let def = SchemaDef::from_toml(
            "[[relation]]\nname = \"r\"\n[[relation.attribute]]\nname = \"a\"\nkind = \"integer\"\n[[relation.attribute]]\nname = \"t\"\nkind = \"text\"\n",
        )
        .unwrap();
        let mut ds = Dataset::new(def);
        let r = ds.relations.get_mut("r").unwrap();
        for (a, t) in [(1, "aa"), (3, "bbbb"), (5, "c"), (7, "dd"), (9, "e"), (11, "ff")] {
            r.push_row(vec![Value::Integer(a), Value::Text(t.into())]).unwrap();
        }
        let pset = PredicateSet::from_predicates(
            "r",
            vec![
                AtomicPredicate::new("r", "a", CmpOp::Lt, Value::Integer(6)),
                AtomicPredicate::new("r", "a", CmpOp::Ge, Value::Integer(4)),
            ],
        );
        (ds, pset)
    }

    fn k(s: &str) -> FragmentKey {
        s.parse().unwrap()
    }

    #[test]
    fn toy_cells_and_cardinalities() {
        let (ds, pset) = toy();
        let data = ds.relation("r").unwrap();
        let mdh = build_mdh(data, &pset).unwrap();
        let cell = |s: &str| Cell::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>());
        assert_eq!(mdh.cells[&cell("10")].tuples, 2);
        assert_eq!(mdh.cells[&cell("11")].tuples, 1);
        assert_eq!(mdh.cells[&cell("01")].tuples, 3);
        assert!(!mdh.cells.contains_key(&cell("00")));
        assert_eq!(mdh.total_tuples(), 6);

        let (values, tuples) = build_bitmap_indexes(data, &pset).unwrap();
        assert_eq!(tuples.bitmaps[0].iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(values.attributes[0].positive[0].iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(fragment_cardinality(&k("10"), &tuples).unwrap(), 2);
        assert_eq!(fragment_cardinality(&k("11"), &tuples).unwrap(), 1);
        assert_eq!(fragment_cardinality(&k("22"), &tuples).unwrap(), 6);
        assert_eq!(derive_distinct_count("a", &k("11"), &values).unwrap(), 1);
        assert_eq!(derive_distinct_count("a", &k("22"), &values).unwrap(), 6);
        assert_eq!(derive_distinct_count("a", &k("00"), &values).unwrap(), 0);

        let agg = aggregate_cells(&mdh, &k("21")).unwrap();
        assert_eq!(agg.tuples, 4);
        let vals: Vec<i64> = agg.values[0]
            .keys()
            .map(|v| match v {
                Value::Integer(i) => *i,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(vals, vec![5, 7, 9, 11]);
    }

    #[test]
    fn histogram_filtering() {
        let h: Vec<Value> = [1, 5, 10, 15].into_iter().map(Value::Integer).collect();
        let pset = PredicateSet::from_predicates(
            "r",
            vec![
                AtomicPredicate::new("r", "a", CmpOp::Lt, Value::Integer(12)),
                AtomicPredicate::new("r", "a", CmpOp::Gt, Value::Integer(20)),
            ],
        );
        let kept = derive_histogram(&h, &k("12"), &pset, "r", "a").unwrap();
        assert_eq!(kept.len(), 3);
        assert_eq!(derive_histogram(&h, &k("22"), &pset, "r", "a").unwrap(), h);
        assert!(derive_histogram(&h, &k("21"), &pset, "r", "a").is_none());
    }

    #[test]
    fn width_and_mcv() {
        let (ds, pset) = toy();
        let s = RelationStats::build(&ds, "r", &pset, 100).unwrap();
        let f = s.derive(&k("10"), None).unwrap();
        assert_eq!(f.reltuples, 2);
        assert_eq!(f.widths, vec![4.0, 3.0]);
        assert_eq!(derive_width(4.0, true, 0, 0), 4.0);
        // every value is unique, so there are no MCVs to re-weight
        assert!(f.attributes[0].as_ref().unwrap().mcv_values.is_empty());
        assert_eq!(f.attributes[0].as_ref().unwrap().distinct, 2);
    }
}
