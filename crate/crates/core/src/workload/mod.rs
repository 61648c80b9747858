//! Workload parsing, predicate atomization and predicate-set extraction.

mod ast;
mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::path::Path;

pub use ast::{AtomicPredicate, CmpOp, JoinEdge, PredicateExpr, PredicateSet, QueryShape};
pub use lexer::{tokenize, Tok, Token};
pub use parser::{parse_atomic, parse_workload};

use crate::bitmap::CompressedBitmap;
use crate::data::SchemaDef;
use crate::error::{Error, Result};

/// Loads a workload file: SQL text, or a JSON array of query shapes when the
/// file name ends in `.json`.
pub fn load_workload(path: &Path, schema: &SchemaDef) -> Result<Vec<QueryShape>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading workload {}", path.display()), e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_structured_workload(&text, schema)
    } else {
        parse_workload(&text, schema)
    }
}

/// Structured alternative to SQL: a JSON array of [`QueryShape`] objects.
pub fn parse_structured_workload(text: &str, schema: &SchemaDef) -> Result<Vec<QueryShape>> {
    let queries: Vec<QueryShape> = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("structured workload: {e}")))?;
    for q in &queries {
        check_shape(q, schema)?;
    }
    Ok(queries)
}

/// Checks the shape invariants of a query against the schema.
pub fn check_shape(q: &QueryShape, schema: &SchemaDef) -> Result<()> {
    for r in &q.relations {
        schema.require(r)?;
    }
    for j in &q.joins {
        if j.left_relation == j.right_relation
            || !q.relations.contains(&j.left_relation)
            || !q.relations.contains(&j.right_relation)
        {
            return Err(Error::Schema(format!("{}: invalid join edge {j}", q.id)));
        }
        for (rel, attr) in [
            (&j.left_relation, &j.left_attribute),
            (&j.right_relation, &j.right_attribute),
        ] {
            if schema.kind_of(rel, attr).is_none() {
                return Err(Error::Schema(format!(
                    "{}: unknown attribute '{rel}.{attr}'",
                    q.id
                )));
            }
        }
    }
    for (rel, expr) in &q.filters {
        if !q.relations.contains(rel) {
            return Err(Error::Schema(format!(
                "{}: filter on relation '{rel}' not in FROM",
                q.id
            )));
        }
        for a in atomize(expr)?.atoms() {
            if &a.relation != rel {
                return Err(Error::Schema(format!(
                    "{}: filter of '{rel}' references '{}'",
                    q.id, a.relation
                )));
            }
            let kind = schema.kind_of(&a.relation, &a.attribute).ok_or_else(|| {
                Error::Schema(format!(
                    "{}: unknown attribute '{}.{}'",
                    q.id, a.relation, a.attribute
                ))
            })?;
            if a.constant.kind() != kind {
                return Err(Error::Type(format!(
                    "{}: constant {} does not match {} attribute '{}.{}'",
                    q.id, a.constant, kind, a.relation, a.attribute
                )));
            }
        }
    }
    Ok(())
}

/// Rewrites BETWEEN into a conjunction and IN into a disjunction of atomics.
pub fn atomize(expr: &PredicateExpr) -> Result<PredicateExpr> {
    Ok(match expr {
        PredicateExpr::True | PredicateExpr::Atom(_) => expr.clone(),
        PredicateExpr::And(v) => {
            PredicateExpr::And(v.iter().map(atomize).collect::<Result<_>>()?)
        }
        PredicateExpr::Or(v) => PredicateExpr::Or(v.iter().map(atomize).collect::<Result<_>>()?),
        PredicateExpr::Not(e) => PredicateExpr::Not(Box::new(atomize(e)?)),
        PredicateExpr::Between {
            relation,
            attribute,
            low,
            high,
        } => {
            if low.kind() != high.kind() {
                return Err(Error::Type(format!(
                    "BETWEEN bounds on {relation}.{attribute} have different kinds"
                )));
            }
            PredicateExpr::And(vec![
                PredicateExpr::Atom(AtomicPredicate::new(
                    relation.clone(),
                    attribute.clone(),
                    CmpOp::Ge,
                    low.clone(),
                )),
                PredicateExpr::Atom(AtomicPredicate::new(
                    relation.clone(),
                    attribute.clone(),
                    CmpOp::Le,
                    high.clone(),
                )),
            ])
        }
        PredicateExpr::In {
            relation,
            attribute,
            values,
        } => {
            if let Some(first) = values.first() {
                if values.iter().any(|v| v.kind() != first.kind()) {
                    return Err(Error::Type(format!(
                        "IN list on {relation}.{attribute} mixes constant kinds"
                    )));
                }
            }
            let eqs = values
                .iter()
                .map(|v| {
                    PredicateExpr::Atom(AtomicPredicate::new(
                        relation.clone(),
                        attribute.clone(),
                        CmpOp::Eq,
                        v.clone(),
                    ))
                })
                .collect::<Vec<_>>();
            if eqs.is_empty() {
                PredicateExpr::Not(Box::new(PredicateExpr::True))
            } else {
                PredicateExpr::Or(eqs)
            }
        }
    })
}

/// Per relation, the deduplicated union of atomic filter predicates in
/// first-seen order. Every schema relation gets an entry.
pub fn collect_predicate_sets(
    queries: &[QueryShape],
    schema: &SchemaDef,
) -> Result<BTreeMap<String, PredicateSet>> {
    let mut sets: BTreeMap<String, PredicateSet> = schema
        .relations
        .iter()
        .map(|r| (r.name.clone(), PredicateSet::new(r.name.clone())))
        .collect();
    for q in queries {
        for expr in q.filters.values() {
            for atom in atomize(expr)?.atoms() {
                let set = sets.get_mut(&atom.relation).ok_or_else(|| {
                    Error::Schema(format!("unknown relation '{}'", atom.relation))
                })?;
                set.push(atom);
            }
        }
    }
    Ok(sets)
}

/// Positions of `pset` that survive redundancy elimination: a predicate is
/// dropped when its tuple bitmap is empty, full, or equal to (or the
/// complement of) an already retained predicate's bitmap.
pub fn minimal_positions(pset: &PredicateSet, bitmaps: &[CompressedBitmap]) -> Result<Vec<usize>> {
    if bitmaps.len() != pset.m() {
        return Err(Error::Consistency(format!(
            "{}: {} bitmaps for {} predicates",
            pset.relation,
            bitmaps.len(),
            pset.m()
        )));
    }
    if let Some(first) = bitmaps.first() {
        if let Some(bad) = bitmaps.iter().find(|b| b.universe() != first.universe()) {
            return Err(Error::Consistency(format!(
                "{}: bitmap universes differ ({} vs {})",
                pset.relation,
                first.universe(),
                bad.universe()
            )));
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    for (i, b) in bitmaps.iter().enumerate() {
        if b.is_empty() || b.is_full() {
            continue;
        }
        let redundant = kept.iter().any(|&k| {
            let other = &bitmaps[k];
            let same = b.len() == other.len() && b.and_len(other) == b.len();
            let complement = b.len() + other.len() == b.universe() as u64 && b.is_disjoint(other);
            same || complement
        });
        if !redundant {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Removes predicates that induce no additional nonempty fragments.
pub fn minimize_predicates(pset: &PredicateSet, bitmaps: &[CompressedBitmap]) -> Result<PredicateSet> {
    let kept = minimal_positions(pset, bitmaps)?;
    Ok(PredicateSet::from_predicates(
        pset.relation.clone(),
        kept.into_iter().map(|i| pset.predicates[i].clone()).collect(),
    ))
}
