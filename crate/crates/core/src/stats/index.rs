//! Finest-granularity histogram and the two bitmap index families.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bitmap::CompressedBitmap;
use crate::data::{Dataset, RelationData};
use crate::error::{Error, Result};
use crate::fragmodel::{Cell, FragmentKey, MAX_PREDICATES};
use crate::value::Value;
use crate::workload::PredicateSet;

/// Aggregate of the tuples falling into one cell (or a union of cells).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellRecord {
    pub tuples: u64,
    /// Per attribute, an ordered value -> occurrence count map.
    pub values: Vec<BTreeMap<Value, u64>>,
    /// Per attribute, the summed byte length of its values.
    pub bytes: Vec<u64>,
}

impl CellRecord {
    pub fn empty(attributes: usize) -> Self {
        CellRecord {
            tuples: 0,
            values: vec![BTreeMap::new(); attributes],
            bytes: vec![0; attributes],
        }
    }

    pub fn merge(&mut self, other: &CellRecord) {
        self.tuples += other.tuples;
        for (mine, theirs) in self.values.iter_mut().zip(&other.values) {
            for (v, c) in theirs {
                *mine.entry(v.clone()).or_default() += c;
            }
        }
        for (b, o) in self.bytes.iter_mut().zip(&other.bytes) {
            *b += o;
        }
    }
}

/// Multidimensional histogram of finest granularity; only nonempty cells
/// are stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mdh {
    pub relation: String,
    pub pset: PredicateSet,
    pub attributes: Vec<String>,
    pub cells: BTreeMap<Cell, CellRecord>,
}

impl Mdh {
    /// Assigns every row to its cell, derived from the tuple-encoded bitmaps.
    pub fn build(data: &RelationData, pset: &PredicateSet, tuples: &TupleEncodedIndex) -> Result<Mdh> {
        if tuples.bitmaps.len() != pset.m() || tuples.universe as usize != data.len() {
            return Err(Error::Consistency(format!(
                "{}: tuple index does not match the relation",
                data.def.name
            )));
        }
        let row_cells = tuples.row_cells();
        let attrs = data.def.attributes.len();
        let mut cells: BTreeMap<Cell, CellRecord> = BTreeMap::new();
        for (row, cell) in row_cells.iter().enumerate() {
            let rec = cells.entry(*cell).or_insert_with(|| CellRecord::empty(attrs));
            rec.tuples += 1;
            for (a, col) in data.columns.iter().enumerate() {
                let v = &col[row];
                *rec.values[a].entry(v.clone()).or_default() += 1;
                rec.bytes[a] += v.byte_len() as u64;
            }
        }
        Ok(Mdh {
            relation: data.def.name.clone(),
            pset: pset.clone(),
            attributes: data.def.attributes.iter().map(|a| a.name.clone()).collect(),
            cells,
        })
    }

    /// Merged record over every stored cell the key covers.
    pub fn aggregate(&self, key: &FragmentKey) -> Result<CellRecord> {
        if key.len() != self.pset.m() {
            return Err(Error::Consistency(format!(
                "key {key} does not match the {}-predicate histogram of '{}'",
                self.pset.m(),
                self.relation
            )));
        }
        let mut out = CellRecord::empty(self.attributes.len());
        for (cell, rec) in &self.cells {
            if key.covers_unchecked(cell) {
                out.merge(rec);
            }
        }
        Ok(out)
    }

    pub fn total_tuples(&self) -> u64 {
        self.cells.values().map(|c| c.tuples).sum()
    }
}

/// Builds the histogram of a relation over a pset local to it.
pub fn build_mdh(data: &RelationData, pset: &PredicateSet) -> Result<Mdh> {
    let tuples = TupleEncodedIndex::build_local(data, pset)?;
    Mdh::build(data, pset, &tuples)
}

/// Merged cell record for a key (see [`Mdh::aggregate`]).
pub fn aggregate_cells(mdh: &Mdh, key: &FragmentKey) -> Result<CellRecord> {
    mdh.aggregate(key)
}

/// One bitmap per predicate over row ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleEncodedIndex {
    pub universe: u32,
    pub bitmaps: Vec<CompressedBitmap>,
}

impl TupleEncodedIndex {
    /// Index over predicates of the relation itself.
    pub fn build_local(data: &RelationData, pset: &PredicateSet) -> Result<Self> {
        let universe = universe_of(data)?;
        let bitmaps = pset
            .iter()
            .map(|p| {
                if p.relation != data.def.name {
                    return Err(Error::Schema(format!(
                        "predicate {p} is not over '{}'",
                        data.def.name
                    )));
                }
                local_rows(data, p)
            })
            .collect::<Result<_>>()?;
        Ok(TupleEncodedIndex { universe, bitmaps })
    }

    /// Index over predicates of the relation or of dimensions it references
    /// through a foreign key; the latter are evaluated on the referenced row.
    pub fn build(dataset: &Dataset, relation: &str, pset: &PredicateSet) -> Result<Self> {
        let data = dataset.relation(relation)?;
        let universe = universe_of(data)?;
        let mut fk_maps: HashMap<&str, Vec<u32>> = HashMap::new();
        let mut bitmaps = Vec::with_capacity(pset.m());
        for p in pset.iter() {
            if p.relation == relation {
                bitmaps.push(local_rows(data, p)?);
                continue;
            }
            let fk = dataset
                .schema
                .foreign_keys
                .iter()
                .find(|f| f.dimension == p.relation)
                .filter(|_| dataset.schema.fact().is_some_and(|f| f.name == relation))
                .ok_or_else(|| {
                    Error::Schema(format!(
                        "predicate {p} is neither over '{relation}' nor over a referenced dimension"
                    ))
                })?;
            if !fk_maps.contains_key(p.relation.as_str()) {
                fk_maps.insert(p.relation.as_str(), dataset.fk_row_map(fk)?);
            }
            let map = &fk_maps[p.relation.as_str()];
            let dim = dataset.relation(&p.relation)?;
            let hits: Vec<bool> = column(dim, &p.attribute)?
                .iter()
                .map(|v| p.holds(v))
                .collect();
            let b = CompressedBitmap::from_members(
                universe,
                map.iter()
                    .enumerate()
                    .filter(|(_, &d)| hits[d as usize])
                    .map(|(r, _)| r as u32),
            )?;
            bitmaps.push(b);
        }
        Ok(TupleEncodedIndex { universe, bitmaps })
    }

    /// The cell of every row.
    pub fn row_cells(&self) -> Vec<Cell> {
        let m = self.bitmaps.len();
        assert!(m <= MAX_PREDICATES);
        let mut bits = vec![0u128; self.universe as usize];
        for (j, b) in self.bitmaps.iter().enumerate() {
            for r in b.iter() {
                bits[r as usize] |= 1 << j;
            }
        }
        bits.into_iter().map(|b| Cell::new(b, m)).collect()
    }

    /// Rows selected by a key: AND of the (possibly complemented) bitmaps.
    pub fn rows(&self, key: &FragmentKey) -> CompressedBitmap {
        select(self.universe, &self.bitmaps, None, key)
    }

    /// Cardinality of the rows a key selects.
    pub fn cardinality(&self, key: &FragmentKey) -> u64 {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (j, d) in key.digits().iter().enumerate() {
            match d {
                1 => pos.push(&self.bitmaps[j]),
                0 => neg.push(&self.bitmaps[j]),
                _ => {}
            }
        }
        match (pos.as_slice(), neg.as_slice()) {
            ([], []) => self.universe as u64,
            ([only], []) => only.len(),
            ([a], [b]) => a.and_not_len(b),
            ([a, b], []) => a.and_len(b),
            ([], [only]) => self.universe as u64 - only.len(),
            _ => self.rows(key).len(),
        }
    }
}

/// AND over constrained positions; digit 0 uses `negative[j]` when given,
/// the complement of `positive[j]` otherwise.
fn select(
    universe: u32,
    positive: &[CompressedBitmap],
    negative: Option<&[CompressedBitmap]>,
    key: &FragmentKey,
) -> CompressedBitmap {
    let mut acc: Option<CompressedBitmap> = None;
    for (j, d) in key.digits().iter().enumerate() {
        if *d == 1 || (*d == 0 && negative.is_some()) {
            let b = if *d == 1 {
                &positive[j]
            } else {
                &negative.unwrap()[j]
            };
            match &mut acc {
                None => acc = Some(b.clone()),
                Some(a) => a.and_inplace(b),
            }
        }
    }
    let mut acc = acc.unwrap_or_else(|| CompressedBitmap::full(universe));
    if negative.is_none() {
        for (j, d) in key.digits().iter().enumerate() {
            if *d == 0 {
                acc.and_not_inplace(&positive[j]);
            }
        }
    }
    acc
}

fn universe_of(data: &RelationData) -> Result<u32> {
    u32::try_from(data.len())
        .map_err(|_| Error::Unsupported(format!("'{}' has too many rows", data.def.name)))
}

fn column<'a>(data: &'a RelationData, attr: &str) -> Result<&'a [Value]> {
    data.column(attr).ok_or_else(|| {
        Error::Schema(format!("unknown attribute '{}.{attr}'", data.def.name))
    })
}

fn local_rows(data: &RelationData, p: &crate::workload::AtomicPredicate) -> Result<CompressedBitmap> {
    let col = column(data, &p.attribute)?;
    if let Some(v) = col.first() {
        if v.kind() != p.constant.kind() {
            return Err(Error::Type(format!(
                "predicate {p} compares a {} attribute with a {} constant",
                v.kind(),
                p.constant.kind()
            )));
        }
    }
    CompressedBitmap::from_members(
        universe_of(data)?,
        col.iter()
            .enumerate()
            .filter(|(_, v)| p.holds(v))
            .map(|(i, _)| i as u32),
    )
}

/// Value-encoded bitmaps of one attribute: bits index its sorted distinct
/// values present in the relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrValueIndex {
    pub attribute: String,
    pub domain: Vec<Value>,
    /// Per predicate: values co-occurring with a tuple satisfying it.
    pub positive: Vec<CompressedBitmap>,
    /// Per predicate: values co-occurring with a tuple violating it. For a
    /// predicate over this attribute it is exactly the complement of
    /// `positive`.
    pub negative: Vec<CompressedBitmap>,
}

impl AttrValueIndex {
    pub fn domain_size(&self) -> u64 {
        self.domain.len() as u64
    }

    /// Distinct-count estimate for the values of a key's fragment.
    pub fn distinct(&self, key: &FragmentKey) -> u64 {
        let universe = self.domain.len() as u32;
        if key.digits().iter().all(|&d| d == 2) {
            return universe as u64;
        }
        select(universe, &self.positive, Some(&self.negative), key).len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEncodedIndex {
    pub attributes: Vec<AttrValueIndex>,
}

impl ValueEncodedIndex {
    pub fn build(data: &RelationData, pset: &PredicateSet, tuples: &TupleEncodedIndex) -> Result<Self> {
        let n = data.len();
        let mut attributes = Vec::with_capacity(data.def.attributes.len());
        for (a, col) in data.def.attributes.iter().zip(&data.columns) {
            let mut domain: Vec<Value> = col.clone();
            domain.sort();
            domain.dedup();
            let index_of: Vec<u32> = col
                .iter()
                .map(|v| domain.binary_search(v).expect("value in domain") as u32)
                .collect();
            let universe = domain.len() as u32;
            let mut positive = Vec::with_capacity(pset.m());
            let mut negative = Vec::with_capacity(pset.m());
            for (j, p) in pset.iter().enumerate() {
                let rows = &tuples.bitmaps[j];
                let pos = CompressedBitmap::from_members(
                    universe,
                    rows.iter().map(|r| index_of[r as usize]),
                )?;
                let neg = if p.is_on(&data.def.name, &a.name) {
                    pos.not()
                } else {
                    CompressedBitmap::from_members(
                        universe,
                        (0..n as u32)
                            .filter(|r| !rows.contains(*r))
                            .map(|r| index_of[r as usize]),
                    )?
                };
                positive.push(pos);
                negative.push(neg);
            }
            attributes.push(AttrValueIndex {
                attribute: a.name.clone(),
                domain,
                positive,
                negative,
            });
        }
        Ok(ValueEncodedIndex { attributes })
    }

    pub fn attribute(&self, name: &str) -> Option<&AttrValueIndex> {
        self.attributes.iter().find(|a| a.attribute == name)
    }
}

/// Both index families for a relation over a pset local to it.
pub fn build_bitmap_indexes(
    data: &RelationData,
    pset: &PredicateSet,
) -> Result<(ValueEncodedIndex, TupleEncodedIndex)> {
    let tuples = TupleEncodedIndex::build_local(data, pset)?;
    let values = ValueEncodedIndex::build(data, pset, &tuples)?;
    Ok((values, tuples))
}

/// Cardinality of a key's fragment from tuple-encoded bitmaps.
pub fn fragment_cardinality(key: &FragmentKey, tuples: &TupleEncodedIndex) -> Result<u64> {
    if key.len() != tuples.bitmaps.len() {
        return Err(Error::Consistency(format!(
            "key {key} does not match {} predicates",
            tuples.bitmaps.len()
        )));
    }
    Ok(tuples.cardinality(key))
}

/// Distinct-count estimate of one attribute in a key's fragment.
pub fn derive_distinct_count(
    attribute: &str,
    key: &FragmentKey,
    values: &ValueEncodedIndex,
) -> Result<u64> {
    let idx = values
        .attribute(attribute)
        .ok_or_else(|| Error::Schema(format!("no value index for '{attribute}'")))?;
    if key.len() != idx.positive.len() {
        return Err(Error::Consistency(format!(
            "key {key} does not match {} predicates",
            idx.positive.len()
        )));
    }
    Ok(idx.distinct(key))
}
