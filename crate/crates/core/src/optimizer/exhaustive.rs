use std::collections::{BTreeMap, BTreeSet};

use super::Problem;
use crate::error::{Error, Result};
use crate::fragmodel::{Fragment, FragmentKey, PartitionSchema, RelationScheme};

/// Largest total predicate count the oracle accepts.
pub const EXHAUSTIVE_LIMIT: usize = 6;

/// Enumerates every predicate subset; each yields the full cross-product
/// schema over the satisfiable cells projected onto the subset. Schemas above
/// the fragment budget are skipped. Returns the cheapest schema and its cost.
pub fn exhaustive_baseline(problem: &Problem, max_fragments: usize) -> Result<(PartitionSchema, f64)> {
    let n = problem.gene_len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::Unsupported(format!(
            "exhaustive search over {n} predicates exceeds the limit of {EXHAUSTIVE_LIMIT}"
        )));
    }
    let mut best: Option<(PartitionSchema, f64)> = None;
    for mask in 0u32..(1 << n) {
        let mut relations = BTreeMap::new();
        for s in &problem.slices {
            let keys: BTreeSet<FragmentKey> = s
                .cells
                .iter()
                .map(|c| {
                    let digits = (0..s.len)
                        .map(|j| {
                            if mask & (1 << (s.start + j)) != 0 {
                                c.bit(j) as u8
                            } else {
                                2
                            }
                        })
                        .collect();
                    FragmentKey::new(digits)
                })
                .collect::<Result<_>>()?;
            relations.insert(
                s.relation.clone(),
                RelationScheme {
                    pset: s.pset.clone(),
                    fragments: keys.into_iter().map(|k| Fragment::new(&s.relation, k)).collect(),
                    derived: false,
                },
            );
        }
        for (name, scheme) in &problem.fixed {
            relations.insert(name.clone(), scheme.clone());
        }
        let schema = PartitionSchema::from_validated(problem.star.clone(), relations)?;
        if schema.fragment_count() > max_fragments {
            continue;
        }
        let cost = problem.schema_cost(&schema)?;
        if best.as_ref().map_or(true, |(_, c)| cost < *c) {
            best = Some((schema, cost));
        }
    }
    best.ok_or_else(|| Error::Config(format!("no schema fits within {max_fragments} fragments")))
}
