use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::PageLayout;
use crate::data::{AttributeDef, RelationData};
use crate::error::Result;
use crate::value::Value;

/// Default number of MCV entries and histogram buckets.
pub const DEFAULT_STATS_TARGET: usize = 100;

/// Per-attribute statistics in the catalog's shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrStats {
    pub attribute: String,
    pub mcv_values: Vec<Value>,
    pub mcv_freqs: Vec<f64>,
    /// Strictly increasing boundaries; absent when fewer than two exist.
    pub histogram: Option<Vec<Value>>,
    pub width: f64,
    /// Signed distinct count: positive count, negative ratio, zero unknown.
    pub stadistinct: f64,
    /// Exact number of distinct values.
    pub distinct: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentStats {
    pub relation: String,
    pub tuples: u64,
    pub pages: u64,
    pub attributes: Vec<AttrStats>,
}

impl ParentStats {
    pub fn attribute(&self, name: &str) -> Option<&AttrStats> {
        self.attributes.iter().find(|a| a.attribute == name)
    }
}

/// Signed distinct-count encoding: a ratio when distinct values exceed a
/// tenth of the rows, the plain count otherwise, zero for no rows.
pub fn encode_stadistinct(distinct: u64, rows: u64) -> f64 {
    if rows == 0 {
        0.0
    } else if distinct as f64 > 0.1 * rows as f64 {
        -(distinct as f64) / rows as f64
    } else {
        distinct as f64
    }
}

/// Distinct count recovered from a signed encoding.
pub fn decode_stadistinct(stadistinct: f64, rows: f64) -> f64 {
    if stadistinct < 0.0 {
        -stadistinct * rows
    } else {
        stadistinct
    }
}

/// Statistics of one column given its value multiset.
pub fn column_stats(
    attr: &AttributeDef,
    counts: &BTreeMap<Value, u64>,
    total_bytes: u64,
    target: usize,
) -> AttrStats {
    let n: u64 = counts.values().sum();
    let mut ranked: Vec<(&Value, u64)> = counts
        .iter()
        .filter(|(_, &c)| c >= 2)
        .map(|(v, &c)| (v, c))
        .collect();
    // descending count, ties by value order (stable over the sorted map)
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked.truncate(target);
    let mcv_values: Vec<Value> = ranked.iter().map(|(v, _)| (*v).clone()).collect();
    let mcv_freqs: Vec<f64> = ranked.iter().map(|(_, c)| *c as f64 / n as f64).collect();

    let rest: Vec<(&Value, u64)> = counts
        .iter()
        .filter(|(v, _)| !mcv_values.contains(v))
        .map(|(v, &c)| (v, c))
        .collect();
    let histogram = equi_depth(&rest, target);

    let width = match attr.fixed_width() {
        Some(w) => w as f64,
        None if n > 0 => total_bytes as f64 / n as f64,
        None => 0.0,
    };
    let distinct = counts.len() as u64;
    AttrStats {
        attribute: attr.name.clone(),
        mcv_values,
        mcv_freqs,
        histogram,
        width,
        stadistinct: encode_stadistinct(distinct, n),
        distinct,
    }
}

/// Equi-depth boundaries over a sorted value multiset: up to `buckets + 1`
/// values at evenly spaced ranks, duplicates collapsed.
fn equi_depth(sorted: &[(&Value, u64)], buckets: usize) -> Option<Vec<Value>> {
    if sorted.len() < 2 || buckets == 0 {
        return None;
    }
    let total: u64 = sorted.iter().map(|(_, c)| c).sum();
    let nb = buckets.min(sorted.len() - 1) as u64;
    let mut bounds: Vec<Value> = Vec::with_capacity(nb as usize + 1);
    let mut idx = 0usize;
    let mut cum = sorted[0].1;
    for i in 0..=nb {
        let rank = (i * (total - 1)) / nb;
        while cum <= rank {
            idx += 1;
            cum += sorted[idx].1;
        }
        let v = sorted[idx].0;
        if bounds.last() != Some(v) {
            bounds.push(v.clone());
        }
    }
    (bounds.len() >= 2).then_some(bounds)
}

/// Page count of `tuples` rows of total width `width_sum` bytes.
pub fn pages_for(tuples: u64, width_sum: f64, layout: &PageLayout) -> Result<u64> {
    layout.pages_for(tuples, width_sum)
}

/// Parent statistics of a base relation, computed exhaustively.
pub fn build_parent_stats(data: &RelationData, target: usize) -> Result<ParentStats> {
    let mut attributes = Vec::with_capacity(data.def.attributes.len());
    for (a, col) in data.def.attributes.iter().zip(&data.columns) {
        let mut counts: BTreeMap<Value, u64> = BTreeMap::new();
        let mut bytes = 0u64;
        for v in col {
            *counts.entry(v.clone()).or_default() += 1;
            bytes += v.byte_len() as u64;
        }
        attributes.push(column_stats(a, &counts, bytes, target));
    }
    let tuples = data.len() as u64;
    let width_sum: f64 = attributes.iter().map(|a| a.width).sum();
    let pages = PageLayout::default().pages_for(tuples, width_sum)?;
    Ok(ParentStats {
        relation: data.def.name.clone(),
        tuples,
        pages,
        attributes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RelationDef;
    use crate::value::Kind;

    fn rel(values: &[i64]) -> RelationData {
        let def = RelationDef {
            name: "r".into(),
            role: Default::default(),
            primary_key: vec![],
            attributes: vec![AttributeDef::new("a", Kind::Integer)],
        };
        let mut d = RelationData::empty(def);
        for v in values {
            d.push_row(vec![Value::Integer(*v)]).unwrap();
        }
        d
    }

    #[test]
    fn mcv_by_hand() {
        let s = build_parent_stats(&rel(&[1, 1, 1, 2, 3]), 100).unwrap();
        let a = &s.attributes[0];
        assert_eq!(a.mcv_values, vec![Value::Integer(1)]);
        assert_eq!(a.mcv_freqs, vec![0.6]);
        assert_eq!(
            a.histogram,
            Some(vec![Value::Integer(2), Value::Integer(3)])
        );
    }

    #[test]
    fn all_distinct_and_empty() {
        let s = build_parent_stats(&rel(&[6, 5, 4, 3, 2, 1]), 100).unwrap();
        let a = &s.attributes[0];
        assert!(a.mcv_values.is_empty());
        assert_eq!(a.histogram.as_ref().unwrap().len(), 6);
        assert_eq!(a.stadistinct, -1.0);
        let e = build_parent_stats(&rel(&[]), 100).unwrap();
        assert_eq!(e.attributes[0].stadistinct, 0.0);
        assert!(e.attributes[0].histogram.is_none());
        assert_eq!(e.pages, 0);
    }

    #[test]
    fn histogram_is_bounded_and_increasing() {
        let values: Vec<i64> = (0..1000).collect();
        let s = build_parent_stats(&rel(&values), 10).unwrap();
        let h = s.attributes[0].histogram.clone().unwrap();
        assert_eq!(h.len(), 11);
        assert_eq!(h.first(), Some(&Value::Integer(0)));
        assert_eq!(h.last(), Some(&Value::Integer(999)));
        assert!(h.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sign_convention() {
        assert_eq!(encode_stadistinct(5, 1000), 5.0);
        assert_eq!(encode_stadistinct(500, 1000), -0.5);
        assert_eq!(decode_stadistinct(-0.5, 1000.0), 500.0);
    }
}
