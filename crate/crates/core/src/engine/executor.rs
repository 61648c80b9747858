//! Materializing executor over partitioned data: fragment pruning, filter
//! evaluation and hash joins, with access counters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::materialize::MaterializedSchema;
use crate::costmodel::participating_tuples;
use crate::error::{Error, Result};
use crate::value::Value;
use crate::workload::QueryShape;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionCounters {
    pub tuples_read: u64,
    pub pages_read: u64,
    pub fragments_scanned: u64,
    pub result_rows: u64,
}

impl std::ops::AddAssign for ExecutionCounters {
    fn add_assign(&mut self, o: Self) {
        self.tuples_read += o.tuples_read;
        self.pages_read += o.pages_read;
        self.fragments_scanned += o.fragments_scanned;
        self.result_rows += o.result_rows;
    }
}

/// Raw join result: one base row id per query relation (in FROM order) for
/// each result row, sorted. Projection and aggregation stay metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub relations: Vec<String>,
    pub rows: Vec<Vec<u32>>,
}

/// Joins one filtered row list per relation, left-deep, each next relation
/// being the first in FROM order that shares a join edge with those already
/// joined. Returns row-id tuples in FROM order.
fn join(q: &QueryShape, mat: &MaterializedSchema, inputs: &[&[u32]]) -> Result<Vec<Vec<u32>>> {
    let n = q.relations.len();
    let mut joined = vec![false; n];
    let mut order = vec![0usize];
    joined[0] = true;
    // partial tuples indexed by position in `order`
    let mut tuples: Vec<Vec<u32>> = inputs[0].iter().map(|&r| vec![r]).collect();
    while order.len() < n {
        let next = (0..n)
            .find(|&i| !joined[i] && order.iter().any(|&j| q.joins_between(&q.relations[i], &q.relations[j]).any(|_| true)))
            .ok_or_else(|| Error::Unsupported(format!("query '{}' has relations without a join path", q.id)))?;
        let rel = &q.relations[next];
        // join keys: (position in order, relation index, attribute there, attribute of next)
        let mut keys = Vec::new();
        for (pos, &j) in order.iter().enumerate() {
            for e in q.joins_between(rel, &q.relations[j]) {
                let a_other = e.attribute_of(&q.relations[j]).unwrap_or_default().to_string();
                let a_next = e.attribute_of(rel).unwrap_or_default().to_string();
                keys.push((pos, j, a_other, a_next));
            }
        }
        let col = |rel_idx: usize, attr: &str| -> Result<&[Value]> {
            mat.data
                .relation(&q.relations[rel_idx])?
                .column(attr)
                .ok_or_else(|| Error::Schema(format!("unknown attribute '{}.{attr}'", q.relations[rel_idx])))
        };
        let next_cols: Vec<&[Value]> = keys.iter().map(|k| col(next, &k.3)).collect::<Result<_>>()?;
        let other_cols: Vec<&[Value]> = keys.iter().map(|k| col(k.1, &k.2)).collect::<Result<_>>()?;
        let mut table: HashMap<Vec<&Value>, Vec<u32>> = HashMap::new();
        for &r in inputs[next] {
            let key: Vec<&Value> = next_cols.iter().map(|c| &c[r as usize]).collect();
            table.entry(key).or_default().push(r);
        }
        let mut out = Vec::new();
        for t in &tuples {
            let probe: Vec<&Value> = keys.iter().zip(&other_cols).map(|(k, c)| &c[t[k.0] as usize]).collect();
            if let Some(matches) = table.get(&probe) {
                for &r in matches {
                    let mut nt = t.clone();
                    nt.push(r);
                    out.push(nt);
                }
            }
        }
        tuples = out;
        joined[next] = true;
        order.push(next);
    }
    Ok(tuples
        .into_iter()
        .map(|t| {
            let mut row = vec![0; n];
            for (pos, &rel) in order.iter().enumerate() {
                row[rel] = t[pos];
            }
            row
        })
        .collect())
}

/// Evaluates a query against materialized fragments, the way a partitioned
/// star is queried: every k-tuple of participating fragments that the cost
/// model costs (a sub-star in star mode) is scanned and joined on its own,
/// and the k-tuples' results are unioned. A fragment that takes part in
/// several k-tuples is scanned, and counted, once per k-tuple.
pub fn execute_query(q: &QueryShape, mat: &MaterializedSchema) -> Result<(QueryResult, ExecutionCounters)> {
    let mut counters = ExecutionCounters::default();
    let mut filtered: Vec<HashMap<usize, Vec<u32>>> = vec![HashMap::new(); q.relations.len()];
    let mut rows = Vec::new();
    for tuple in participating_tuples(q, &mat.schema)? {
        for (i, &fi) in tuple.iter().enumerate() {
            let rel = &q.relations[i];
            let f = &mat.relation(rel)?.fragments[fi];
            counters.tuples_read += f.rows.len() as u64;
            counters.pages_read += f.stats.pages;
            counters.fragments_scanned += 1;
            if filtered[i].contains_key(&fi) {
                continue;
            }
            let data = mat.data.relation(rel)?;
            let filter = q.filter(rel);
            let kept = f
                .rows
                .iter()
                .copied()
                .filter(|&r| {
                    let lookup = |relation: &str, attribute: &str| -> &Value {
                        debug_assert_eq!(relation, rel);
                        let a = data.def.attribute_index(attribute).expect("checked attribute");
                        &data.columns[a][r as usize]
                    };
                    filter.eval(&lookup)
                })
                .collect();
            filtered[i].insert(fi, kept);
        }
        let inputs: Vec<&[u32]> = tuple.iter().enumerate().map(|(i, fi)| filtered[i][fi].as_slice()).collect();
        rows.extend(join(q, mat, &inputs)?);
    }
    rows.sort_unstable();
    counters.result_rows = rows.len() as u64;
    Ok((
        QueryResult {
            relations: q.relations.clone(),
            rows,
        },
        counters,
    ))
}

/// Runs every query; per-query results and counters in workload order.
pub fn execute_workload(
    workload: &[QueryShape],
    mat: &MaterializedSchema,
) -> Result<Vec<(QueryResult, ExecutionCounters)>> {
    use rayon::prelude::*;
    workload.par_iter().map(|q| execute_query(q, mat)).collect()
}
