//! Deterministic optimizer-style cost estimation over catalog records:
//! sequential scans of participating fragments and left-deep equality-join
//! chains, in disk-access-equivalent units.

mod selectivity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use selectivity::{atom_selectivity, estimate_selectivity, histogram_fraction, DEFAULT_RANGE_SELECTIVITY};

use crate::catalog::{AttributeScope, CatalogStore, RelationCatalogRecord};
use crate::data::SchemaDef;
use crate::error::{Error, Result};
use crate::fragmodel::{fragment_id, key_conjunction, Conjunction, FragmentKey, PartitionSchema, RelationScheme};
use crate::workload::{atomize, AtomicPredicate, PredicateExpr, QueryShape};

/// Cost units per operation, at the reference DBMS's documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub seq_page_cost: f64,
    /// Carried for completeness; neither modeled plan shape uses it.
    pub random_page_cost: f64,
    pub cpu_tuple_cost: f64,
    pub cpu_operator_cost: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            seq_page_cost: 1.0,
            random_page_cost: 4.0,
            cpu_tuple_cost: 0.01,
            cpu_operator_cost: 0.0025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanCost {
    pub total: f64,
    pub rows: f64,
}

/// Sequential scan of one fragment with a filter of `quals` atomic leaves
/// and estimated selectivity `selectivity`.
pub fn scan_cost_with(rec: &RelationCatalogRecord, quals: usize, selectivity: f64, params: &CostParams) -> PlanCost {
    let tuples = rec.reltuples as f64;
    PlanCost {
        total: rec.relpages as f64 * params.seq_page_cost
            + tuples * params.cpu_tuple_cost
            + tuples * quals as f64 * params.cpu_operator_cost,
        rows: tuples * selectivity,
    }
}

/// Sequential scan cost of a fragment under `filter`, with selectivities from
/// the fragment's attribute records.
pub fn scan_cost(rec: &RelationCatalogRecord, filter: &PredicateExpr, store: &CatalogStore, params: &CostParams) -> Result<PlanCost> {
    let filter = atomize(filter)?;
    let sel = estimate_selectivity(&filter, &|a: &AtomicPredicate| store.attribute(&rec.fragment, &a.attribute), rec.reltuples as f64);
    Ok(scan_cost_with(rec, filter.qual_count(), sel, params))
}

/// Hash-join-style combination of two costed inputs.
pub fn join_cost(outer: PlanCost, inner: PlanCost, join_selectivity: f64, params: &CostParams) -> PlanCost {
    let rows = outer.rows * inner.rows * join_selectivity;
    PlanCost {
        total: outer.total
            + inner.total
            + params.cpu_operator_cost * inner.rows
            + params.cpu_tuple_cost * (outer.rows + rows),
        rows,
    }
}

/// A query with its filters atomized and put in disjunctive normal form once.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub shape: QueryShape,
    filters: BTreeMap<String, PreparedFilter>,
}

#[derive(Debug, Clone)]
struct PreparedFilter {
    expr: PredicateExpr,
    dnf: Vec<Vec<AtomicPredicate>>,
    quals: usize,
}

impl PreparedQuery {
    pub fn new(q: &QueryShape) -> Result<Self> {
        let mut filters = BTreeMap::new();
        for rel in &q.relations {
            let expr = atomize(q.filter(rel))?;
            let dnf = expr.dnf();
            let quals = expr.qual_count();
            filters.insert(rel.clone(), PreparedFilter { expr, dnf, quals });
        }
        Ok(PreparedQuery {
            shape: q.clone(),
            filters,
        })
    }

    fn filter(&self, rel: &str) -> &PreparedFilter {
        &self.filters[rel]
    }
}

pub fn prepare_workload(workload: &[QueryShape]) -> Result<Vec<PreparedQuery>> {
    workload.iter().map(PreparedQuery::new).collect()
}

/// Whether a fragment can hold tuples satisfying a filter given in DNF.
pub fn fragment_participates(dnf: &[Vec<AtomicPredicate>], key: &FragmentKey, scheme: &RelationScheme) -> Result<bool> {
    let base = key_conjunction(key, &scheme.pset)?;
    Ok(dnf.iter().any(|term| {
        let mut c = base.clone();
        for a in term {
            c.add(a, true);
        }
        c.satisfiable()
    }))
}

/// Whether two fragments' defining constraints on the two sides of an
/// equality join can hold a common value. Without comparable constraints the
/// pair is taken to intersect.
fn ranges_intersect(
    a: (&RelationScheme, &FragmentKey, &str, &str),
    b: (&RelationScheme, &FragmentKey, &str, &str),
) -> bool {
    let mut c = Conjunction::new();
    let mut kind = None;
    for (scheme, key, rel, attr) in [a, b] {
        for (p, d) in scheme.pset.iter().zip(key.digits()) {
            if *d == 2 || !p.is_on(rel, attr) {
                continue;
            }
            match kind {
                None => kind = Some(p.constant.kind()),
                Some(k) if k != p.constant.kind() => return true,
                _ => {}
            }
            let shared = AtomicPredicate::new("", "", p.op, p.constant.clone());
            c.add(&shared, *d == 1);
        }
    }
    c.satisfiable()
}

/// Per-query cost with the number of participating fragments and costed
/// fragment tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCost {
    pub id: String,
    pub fragments: usize,
    pub tuples: usize,
    pub total: f64,
    pub rows: f64,
}

struct RelState<'a> {
    name: &'a str,
    scheme: &'a RelationScheme,
    /// Scan cost per fragment index; `None` for pruned fragments.
    scans: Vec<Option<PlanCost>>,
}

fn relation_state<'a>(
    rel: &'a str,
    q: &PreparedQuery,
    schema: &'a PartitionSchema,
    store: &CatalogStore,
    params: &CostParams,
    prune: bool,
    fallback: &'a RelationScheme,
) -> Result<RelState<'a>> {
    let scheme = schema.scheme(rel).unwrap_or(fallback);
    let f = q.filter(rel);
    let mut scans = Vec::with_capacity(scheme.fragments.len());
    for frag in &scheme.fragments {
        if prune && !fragment_participates(&f.dnf, &frag.key, scheme)? {
            scans.push(None);
            continue;
        }
        let rec = store
            .relation(&frag.id)
            .ok_or_else(|| Error::Consistency(format!("no catalog record for fragment '{}'", frag.id)))?;
        let sel = estimate_selectivity(
            &f.expr,
            &|a: &AtomicPredicate| store.attribute(&frag.id, &a.attribute),
            rec.reltuples as f64,
        );
        scans.push(Some(scan_cost_with(rec, f.quals, sel, params)));
    }
    Ok(RelState { name: rel, scheme, scans })
}

/// Selectivity of the equality joins between relation `i` and earlier ones.
fn chain_join_selectivity(q: &QueryShape, rels: &[RelState], assign: &[usize], i: usize, store: &CatalogStore, def: Option<&SchemaDef>) -> f64 {
    let mut sel = 1.0;
    for j in 0..i {
        for e in q.joins_between(rels[i].name, rels[j].name) {
            let distinct = |k: usize| -> f64 {
                let frag = &rels[k].scheme.fragments[assign[k]];
                let attr = e.attribute_of(rels[k].name).unwrap_or_default();
                let tuples = store.relation(&frag.id).map_or(0.0, |r| r.reltuples as f64);
                store
                    .attribute(&frag.id, attr)
                    .map_or(tuples, |a| a.distinct(tuples))
            };
            let is_pk = |k: usize| {
                let attr = e.attribute_of(rels[k].name).unwrap_or_default();
                def.and_then(|d| d.relation(rels[k].name))
                    .and_then(|r| r.single_pk())
                    .is_some_and(|pk| pk == attr)
            };
            let d = match (is_pk(i), is_pk(j)) {
                (true, false) => distinct(i),
                (false, true) => distinct(j),
                _ => distinct(i).max(distinct(j)),
            };
            sel *= 1.0 / d.max(1.0);
        }
    }
    sel.clamp(0.0, 1.0)
}

/// Cost of one query against a schema's catalog. With `prune` off every
/// fragment participates (used to check pruning consistency).
pub fn prepared_query_cost(
    q: &PreparedQuery,
    schema: &PartitionSchema,
    store: &CatalogStore,
    params: &CostParams,
    def: Option<&SchemaDef>,
    prune: bool,
) -> Result<QueryCost> {
    let shape = &q.shape;
    let fallbacks: Vec<RelationScheme> = shape
        .relations
        .iter()
        .map(|r| {
            let key = FragmentKey::all_two(0);
            RelationScheme {
                pset: crate::workload::PredicateSet::new(r.clone()),
                fragments: vec![crate::fragmodel::Fragment {
                    id: fragment_id(r, &key),
                    key,
                }],
                derived: false,
            }
        })
        .collect();
    let rels: Vec<RelState> = shape
        .relations
        .iter()
        .zip(&fallbacks)
        .map(|(r, fb)| relation_state(r, q, schema, store, params, prune, fb))
        .collect::<Result<_>>()?;
    if rels.len() == 1 {
        let mut total = 0.0;
        let mut rows = 0.0;
        let mut tuples = 0;
        for s in rels[0].scans.iter().flatten() {
            total += s.total;
            rows += s.rows;
            tuples += 1;
        }
        return Ok(QueryCost {
            id: shape.id.clone(),
            fragments: tuples,
            tuples,
            total,
            rows,
        });
    }

    let (fact_pos, dim_slot, order) = star_order(&rels, schema, shape);
    let mut acc = (0.0f64, 0.0f64, 0usize);
    let mut used: Vec<Vec<bool>> = rels.iter().map(|r| vec![false; r.scans.len()]).collect();
    let mut assign = vec![usize::MAX; rels.len()];
    enumerate(
        0,
        &order,
        &rels,
        fact_pos,
        &dim_slot,
        schema,
        shape,
        &mut assign,
        &mut |assign: &[usize]| {
            let mut plan = rels[0].scans[assign[0]].expect("participating");
            for i in 1..rels.len() {
                let inner = rels[i].scans[assign[i]].expect("participating");
                let sel = chain_join_selectivity(shape, &rels, assign, i, store, def);
                plan = join_cost(plan, inner, sel, params);
            }
            acc.0 += plan.total;
            acc.1 += plan.rows;
            acc.2 += 1;
            for (u, &f) in used.iter_mut().zip(assign) {
                u[f] = true;
            }
        },
    );
    Ok(QueryCost {
        id: shape.id.clone(),
        fragments: used.iter().flatten().filter(|u| **u).count(),
        tuples: acc.2,
        total: acc.0,
        rows: acc.1,
    })
}

type StarOrder = (Option<usize>, Vec<Option<usize>>, Vec<usize>);

/// Star roles of a query's relations: position of the fact, per relation the
/// dimension slot it fills in fact fragments, and the enumeration order (the
/// fact first, so that dimension fragments follow from its components).
fn star_order(rels: &[RelState], schema: &PartitionSchema, shape: &QueryShape) -> StarOrder {
    let star = schema.star.as_ref().filter(|s| schema.scheme(&s.fact).is_some_and(|f| f.derived));
    let fact_pos = star.and_then(|s| rels.iter().position(|r| r.name == s.fact));
    let dim_slot: Vec<Option<usize>> = rels
        .iter()
        .map(|r| {
            let s = star?;
            fact_pos?;
            if !shape.joins_between(&s.fact, r.name).any(|_| true) {
                return None;
            }
            s.dimensions.iter().position(|d| d == r.name)
        })
        .collect();
    let mut order: Vec<usize> = Vec::with_capacity(rels.len());
    if let Some(f) = fact_pos {
        order.push(f);
    }
    order.extend((0..rels.len()).filter(|i| Some(*i) != fact_pos));
    (fact_pos, dim_slot, order)
}

/// Fragment indices (per relation, in FROM order) of every k-tuple the cost
/// model costs for `q`: participating fragments, combined through the fact's
/// components in star mode and by range intersection otherwise.
pub fn participating_tuples(q: &QueryShape, schema: &PartitionSchema) -> Result<Vec<Vec<usize>>> {
    let prepared = PreparedQuery::new(q)?;
    let mut rels = Vec::with_capacity(q.relations.len());
    for rel in &q.relations {
        let scheme = schema
            .scheme(rel)
            .ok_or_else(|| Error::Schema(format!("relation '{rel}' is not in the schema")))?;
        let dnf = &prepared.filter(rel).dnf;
        let mut scans = Vec::with_capacity(scheme.fragments.len());
        for f in &scheme.fragments {
            scans.push(fragment_participates(dnf, &f.key, scheme)?.then(PlanCost::default));
        }
        rels.push(RelState { name: rel, scheme, scans });
    }
    let (fact_pos, dim_slot, order) = star_order(&rels, schema, q);
    let mut out = Vec::new();
    let mut assign = vec![usize::MAX; rels.len()];
    enumerate(0, &order, &rels, fact_pos, &dim_slot, schema, q, &mut assign, &mut |a: &[usize]| {
        out.push(a.to_vec())
    });
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    depth: usize,
    order: &[usize],
    rels: &[RelState],
    fact_pos: Option<usize>,
    dim_slot: &[Option<usize>],
    schema: &PartitionSchema,
    q: &QueryShape,
    assign: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if depth == order.len() {
        visit(assign);
        return;
    }
    let i = order[depth];
    if let (Some(f), Some(slot)) = (fact_pos, dim_slot[i]) {
        // fixed by the fact fragment: its component for this dimension
        let comp = schema.fact_components(assign[f])[slot];
        if rels[i].scans[comp].is_some() && compatible(i, comp, order, depth, rels, fact_pos, dim_slot, q, assign) {
            assign[i] = comp;
            enumerate(depth + 1, order, rels, fact_pos, dim_slot, schema, q, assign, visit);
        }
        return;
    }
    for (k, s) in rels[i].scans.iter().enumerate() {
        if s.is_none() || !compatible(i, k, order, depth, rels, fact_pos, dim_slot, q, assign) {
            continue;
        }
        assign[i] = k;
        enumerate(depth + 1, order, rels, fact_pos, dim_slot, schema, q, assign, visit);
    }
}

/// Range-intersection check of fragment `k` of relation `i` against every
/// already assigned relation it joins, except fact/dimension pairs, whose
/// compatibility is structural.
#[allow(clippy::too_many_arguments)]
fn compatible(
    i: usize,
    k: usize,
    order: &[usize],
    depth: usize,
    rels: &[RelState],
    fact_pos: Option<usize>,
    dim_slot: &[Option<usize>],
    q: &QueryShape,
    assign: &[usize],
) -> bool {
    for &j in &order[..depth] {
        let structural = (Some(j) == fact_pos && dim_slot[i].is_some()) || (Some(i) == fact_pos && dim_slot[j].is_some());
        if structural {
            continue;
        }
        for e in q.joins_between(rels[i].name, rels[j].name) {
            let ai = e.attribute_of(rels[i].name).unwrap_or_default();
            let aj = e.attribute_of(rels[j].name).unwrap_or_default();
            let fi = &rels[i].scheme.fragments[k].key;
            let fj = &rels[j].scheme.fragments[assign[j]].key;
            if !ranges_intersect((rels[i].scheme, fi, rels[i].name, ai), (rels[j].scheme, fj, rels[j].name, aj)) {
                return false;
            }
        }
    }
    true
}

/// Cost of one query against a schema's catalog.
pub fn query_cost(q: &QueryShape, schema: &PartitionSchema, store: &CatalogStore, params: &CostParams) -> Result<QueryCost> {
    prepared_query_cost(&PreparedQuery::new(q)?, schema, store, params, None, true)
}

/// Per-query costs of a prepared workload, in workload order.
pub fn prepared_workload_costs(
    workload: &[PreparedQuery],
    schema: &PartitionSchema,
    store: &CatalogStore,
    params: &CostParams,
    def: Option<&SchemaDef>,
) -> Result<Vec<QueryCost>> {
    workload
        .iter()
        .map(|q| prepared_query_cost(q, schema, store, params, def, true))
        .collect()
}

/// Total workload cost: the sum of query costs.
pub fn workload_cost(schema: &PartitionSchema, workload: &[QueryShape], store: &CatalogStore, params: &CostParams) -> Result<f64> {
    let prepared = prepare_workload(workload)?;
    Ok(prepared_workload_costs(&prepared, schema, store, params, None)?
        .iter()
        .map(|c| c.total)
        .sum())
}

/// Attributes the cost model reads per relation: filter attributes and join
/// attributes. In star mode the fact is included with its own attributes.
pub fn cost_scope(workload: &[QueryShape], def: &SchemaDef) -> AttributeScope {
    let mut scope: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut add = |rel: &str, attr: &str| {
        if let Some(i) = def.relation(rel).and_then(|r| r.attribute_index(attr)) {
            let v = scope.entry(rel.to_string()).or_default();
            if !v.contains(&i) {
                v.push(i);
            }
        }
    };
    for q in workload {
        for (rel, f) in &q.filters {
            for a in f.atoms() {
                add(rel, &a.attribute);
            }
        }
        for e in &q.joins {
            add(&e.left_relation, &e.left_attribute);
            add(&e.right_relation, &e.right_attribute);
        }
    }
    for v in scope.values_mut() {
        v.sort_unstable();
    }
    scope
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_and_join_arithmetic() {
        let p = CostParams::default();
        let rec = RelationCatalogRecord {
            fragment: "r__".into(),
            relation: "r".into(),
            reltuples: 1000,
            relpages: 14,
        };
        let s = scan_cost_with(&rec, 2, 1.0, &p);
        assert!((s.total - 29.0).abs() < 1e-9);
        let j = join_cost(
            PlanCost { total: 29.0, rows: 100.0 },
            PlanCost { total: 5.0, rows: 10.0 },
            0.1,
            &p,
        );
        assert!((j.rows - 100.0).abs() < 1e-9);
        assert!((j.total - 36.025).abs() < 1e-9);
        let z = join_cost(PlanCost { total: 1.0, rows: 5.0 }, PlanCost { total: 2.0, rows: 0.0 }, 0.5, &p);
        assert_eq!(z.rows, 0.0);
        assert!((z.total - 3.05).abs() < 1e-9);
    }
}
