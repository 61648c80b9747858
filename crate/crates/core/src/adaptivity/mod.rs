//! Schema adaptation when the workload changes: merging fragments whose
//! distinguishing predicates disappear, splitting fragments on new
//! predicates, and statistics refresh when data changes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{derive_fragment_records, refresh_catalog, CatalogStore};
use crate::data::{Dataset, SchemaDef};
use crate::error::{Error, Result};
use crate::fragmodel::{key_satisfiable, FragmentKey, PartitionSchema};
use crate::stats::{DatasetStats, RelationStats, TupleEncodedIndex};
use crate::workload::{atomize, minimal_positions, AtomicPredicate, PredicateSet, QueryShape};

/// Which pages a split reads: the whole parent, or only the smaller child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRead {
    #[default]
    Parent,
    Smaller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeGroup {
    pub relation: String,
    /// The largest member; its file is kept.
    pub target: String,
    /// Members whose tuples move into the target.
    pub sources: Vec<String>,
    /// Key of the merged fragment over the old predicate set.
    pub merged_key: FragmentKey,
    /// Id of the merged fragment in the resulting schema.
    pub result: String,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergePlan {
    pub removed: Vec<AtomicPredicate>,
    pub groups: Vec<MergeGroup>,
    pub schema: PartitionSchema,
    pub cost: u64,
    base: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub relation: String,
    pub parent: String,
    pub children: Vec<String>,
    /// Children that are written to new files.
    pub written: Vec<String>,
    pub cost: u64,
}

#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub added: Vec<AtomicPredicate>,
    pub splits: Vec<SplitEntry>,
    pub schema: PartitionSchema,
    pub cost: u64,
    /// Statistics over the extended predicate sets; `None` for empty plans.
    pub stats: Option<DatasetStats>,
    base: String,
}

#[derive(Debug, Clone)]
pub enum AdaptationPlan {
    Merge(MergePlan),
    Split(SplitPlan),
}

impl AdaptationPlan {
    pub fn cost(&self) -> u64 {
        match self {
            AdaptationPlan::Merge(p) => p.cost,
            AdaptationPlan::Split(p) => p.cost,
        }
    }

    pub fn schema(&self) -> &PartitionSchema {
        match self {
            AdaptationPlan::Merge(p) => &p.schema,
            AdaptationPlan::Split(p) => &p.schema,
        }
    }

    fn base(&self) -> &str {
        match self {
            AdaptationPlan::Merge(p) => &p.base,
            AdaptationPlan::Split(p) => &p.base,
        }
    }

    /// One JSON object per group or split, then a total line.
    pub fn report(&self) -> String {
        let mut lines = Vec::new();
        match self {
            AdaptationPlan::Merge(p) => {
                for g in &p.groups {
                    lines.push(serde_json::json!({"kind": "merge", "group": g}).to_string());
                }
                lines.push(
                    serde_json::json!({
                        "kind": "total",
                        "removed": p.removed.iter().map(ToString::to_string).collect::<Vec<_>>(),
                        "cost": p.cost,
                    })
                    .to_string(),
                );
            }
            AdaptationPlan::Split(p) => {
                for s in &p.splits {
                    lines.push(serde_json::json!({"kind": "split", "split": s}).to_string());
                }
                lines.push(
                    serde_json::json!({
                        "kind": "total",
                        "added": p.added.iter().map(ToString::to_string).collect::<Vec<_>>(),
                        "cost": p.cost,
                    })
                    .to_string(),
                );
            }
        }
        lines.join("\n") + "\n"
    }
}

pub struct AdaptationResult {
    pub psets: BTreeMap<String, PredicateSet>,
    pub schema: PartitionSchema,
    pub store: CatalogStore,
    pub stats: DatasetStats,
}

/// Index of the largest member by cardinality (first on ties) and the merge
/// cost: every other member is read once and written once.
pub fn merge_group_cost(members: &[(u64, u64)]) -> (usize, u64) {
    let mut target = 0;
    for (i, m) in members.iter().enumerate() {
        if m.0 > members[target].0 {
            target = i;
        }
    }
    let cost = members
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(_, m)| 2 * m.1)
        .sum();
    (target, cost)
}

fn record(store: &CatalogStore, id: &str) -> Result<(u64, u64)> {
    store
        .relation(id)
        .map(|r| (r.reltuples, r.relpages))
        .ok_or_else(|| Error::Consistency(format!("no catalog record for '{id}'")))
}

fn query_atoms(q: &QueryShape) -> Result<Vec<AtomicPredicate>> {
    let mut out = Vec::new();
    for f in q.filters.values() {
        out.extend(atomize(f)?.atoms());
    }
    Ok(out)
}

fn assignments(schema: &PartitionSchema) -> BTreeMap<String, (PredicateSet, Vec<FragmentKey>)> {
    schema
        .relations
        .iter()
        .filter(|(_, s)| !s.derived)
        .map(|(n, s)| (n.clone(), (s.pset.clone(), s.keys())))
        .collect()
}

/// Plans the merges implied by removing `removed` from `workload`: every
/// predicate used only by the removed query is dropped and fragments that
/// then coincide are merged into their largest member.
pub fn plan_merge_on_removal(
    schema: &PartitionSchema,
    def: &SchemaDef,
    workload: &[QueryShape],
    removed: &str,
    store: &CatalogStore,
) -> Result<MergePlan> {
    let q = workload
        .iter()
        .find(|q| q.id == removed)
        .ok_or_else(|| Error::Config(format!("query '{removed}' is not in the workload")))?;
    let mut still_used = BTreeSet::new();
    for other in workload.iter().filter(|o| o.id != removed) {
        still_used.extend(query_atoms(other)?);
    }
    let mut dropped: Vec<AtomicPredicate> = Vec::new();
    let mut assign = assignments(schema);
    let mut groups = Vec::new();
    // old fragment index -> group index, per relation
    let mut regroup: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (rel, (pset, keys)) in assign.iter_mut() {
        let mut positions: Vec<usize> = query_atoms(q)?
            .iter()
            .filter(|a| !still_used.contains(*a))
            .filter_map(|a| pset.position(a))
            .collect();
        positions.sort_unstable();
        positions.dedup();
        if positions.is_empty() {
            continue;
        }
        dropped.extend(positions.iter().map(|&p| pset.predicates[p].clone()));
        let project = |k: &FragmentKey| positions.iter().rev().fold(k.clone(), |k, &p| k.remove_digit(p));
        // (new key, old key generalization, members)
        let mut merged: Vec<(FragmentKey, FragmentKey, Vec<usize>)> = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            let pk = project(k);
            match merged.iter_mut().find(|g| g.0 == pk) {
                Some(g) => {
                    g.1 = g.1.generalize(k);
                    g.2.push(i);
                }
                None => merged.push((pk, k.clone(), vec![i])),
            }
        }
        // projected keys may overlap; fold overlapping groups together
        'outer: loop {
            for a in 0..merged.len() {
                for b in a + 1..merged.len() {
                    if merged[a].0.intersects(&merged[b].0) {
                        let gb = merged.remove(b);
                        merged[a].0 = merged[a].0.generalize(&gb.0);
                        merged[a].1 = merged[a].1.generalize(&gb.1);
                        merged[a].2.extend(gb.2);
                        merged[a].2.sort_unstable();
                        continue 'outer;
                    }
                }
            }
            break;
        }
        let old_ids: Vec<String> = schema.relations[rel].fragments.iter().map(|f| f.id.clone()).collect();
        let mut map = vec![0; keys.len()];
        for (gi, g) in merged.iter().enumerate() {
            for &m in &g.2 {
                map[m] = gi;
            }
            if g.2.len() < 2 {
                continue;
            }
            let members: Vec<(u64, u64)> = g.2.iter().map(|&m| record(store, &old_ids[m])).collect::<Result<_>>()?;
            let (t, cost) = merge_group_cost(&members);
            groups.push(MergeGroup {
                relation: rel.clone(),
                target: old_ids[g.2[t]].clone(),
                sources: g.2.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, &m)| old_ids[m].clone()).collect(),
                merged_key: g.1.clone(),
                result: crate::fragmodel::fragment_id(rel, &g.0),
                cost,
            });
        }
        regroup.insert(rel.clone(), map);
        let mut new_pset = PredicateSet::new(rel.clone());
        for (i, p) in pset.iter().enumerate() {
            if !positions.contains(&i) {
                new_pset.push(p.clone());
            }
        }
        *pset = new_pset;
        *keys = merged.into_iter().map(|g| g.0).collect();
    }
    let new_schema = PartitionSchema::new(def, assign)?;

    // derived fact fragments follow their dimension components
    if let (Some(star), false) = (&schema.star, regroup.is_empty()) {
        let fact = &schema.relations[&star.fact];
        let new_fact = &new_schema.relations[&star.fact];
        let mut by_new: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..fact.fragments.len() {
            let comps: Vec<usize> = schema
                .fact_components(i)
                .iter()
                .zip(&star.dimensions)
                .map(|(&c, d)| regroup.get(d).map_or(c, |m| m[c]))
                .collect();
            by_new.entry(new_schema.fact_fragment_index(&comps)).or_default().push(i);
        }
        for (ni, members) in by_new {
            if members.len() < 2 {
                continue;
            }
            let ids: Vec<&str> = members.iter().map(|&m| fact.fragments[m].id.as_str()).collect();
            let recs: Vec<(u64, u64)> = ids.iter().map(|id| record(store, id)).collect::<Result<_>>()?;
            let (t, cost) = merge_group_cost(&recs);
            let merged_key = members
                .iter()
                .skip(1)
                .fold(fact.fragments[members[0]].key.clone(), |k, &m| k.generalize(&fact.fragments[m].key));
            groups.push(MergeGroup {
                relation: star.fact.clone(),
                target: ids[t].to_string(),
                sources: ids.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, s)| s.to_string()).collect(),
                merged_key,
                result: new_fact.fragments[ni].id.clone(),
                cost,
            });
        }
    }
    let cost = groups.iter().map(|g| g.cost).sum();
    Ok(MergePlan {
        removed: dropped,
        groups,
        schema: new_schema,
        cost,
        base: schema.to_toml(),
    })
}

fn pages_of(rel: &str, pset: &PredicateSet, key: &FragmentKey, stats: &DatasetStats) -> Result<(u64, u64)> {
    let id = crate::fragmodel::fragment_id(rel, key);
    let (r, _) = derive_fragment_records(rel, &id, pset, key, stats, Some(&[]))?;
    Ok((r.reltuples, r.relpages))
}

/// Plans the splits implied by adding `query`: each of its predicates that
/// is new (and not redundant on the data) splits every fragment of its
/// relation into two complementary children. Splits whose child would be
/// unsatisfiable are skipped.
pub fn plan_split_on_addition(
    schema: &PartitionSchema,
    def: &SchemaDef,
    query: &QueryShape,
    dataset: &Dataset,
    stats: &DatasetStats,
    read: SplitRead,
) -> Result<SplitPlan> {
    let mut assign = assignments(schema);
    let mut added: BTreeMap<String, Vec<AtomicPredicate>> = BTreeMap::new();
    for a in query_atoms(query)? {
        let Some((pset, _)) = assign.get(&a.relation) else {
            continue;
        };
        if pset.position(&a).is_some() {
            continue;
        }
        let mut trial = pset.clone();
        trial.predicates.extend(added.get(&a.relation).into_iter().flatten().cloned());
        if !trial.push(a.clone()) {
            continue;
        }
        let data = dataset.relation(&a.relation)?;
        let idx = TupleEncodedIndex::build_local(data, &trial)?;
        let kept = minimal_positions(&trial, &idx.bitmaps)?;
        if kept.contains(&(trial.m() - 1)) {
            added.entry(a.relation.clone()).or_default().push(a);
        }
    }
    let base = schema.to_toml();
    if added.is_empty() {
        return Ok(SplitPlan {
            added: Vec::new(),
            splits: Vec::new(),
            schema: schema.clone(),
            cost: 0,
            stats: None,
            base,
        });
    }

    // statistics over the extended sets
    let mut new_stats = stats.clone();
    new_stats.epoch += 1;
    for (rel, preds) in &added {
        let (pset, keys) = assign.get_mut(rel).expect("relation present");
        let m_old = pset.m();
        for p in preds {
            pset.push(p.clone());
        }
        for k in keys.iter_mut() {
            let mut d = k.digits().to_vec();
            d.resize(pset.m(), 2);
            *k = FragmentKey::new(d)?;
        }
        debug_assert!(pset.m() > m_old);
        new_stats
            .relations
            .insert(rel.clone(), RelationStats::build(dataset, rel, pset, stats.target)?);
    }
    if let Some(star) = &schema.star {
        if added.keys().any(|r| star.is_dimension(r)) {
            let psets: BTreeMap<String, PredicateSet> = assign.iter().map(|(n, (p, _))| (n.clone(), p.clone())).collect();
            let lifted = star.lifted_pset(&psets);
            new_stats
                .relations
                .insert(star.fact.clone(), RelationStats::build(dataset, &star.fact, &lifted, stats.target)?);
        }
    }

    let mut splits = Vec::new();
    // per relation: old fragment index -> indices of its final children
    let mut lineage: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for (rel, preds) in &added {
        let (pset, keys) = assign.get_mut(rel).expect("relation present");
        let m = pset.m();
        // (key, origin old index)
        let mut current: Vec<(FragmentKey, usize)> = keys.iter().cloned().zip(0..).collect();
        // unsplit keys still name the existing fragment
        let original: BTreeMap<FragmentKey, String> = keys
            .iter()
            .zip(&schema.relations[rel].fragments)
            .map(|(k, f)| (k.clone(), f.id.clone()))
            .collect();
        for pos in m - preds.len()..m {
            let mut next = Vec::new();
            for (k, origin) in current {
                let c0 = k.with_digit(pos, 0);
                let c1 = k.with_digit(pos, 1);
                if !key_satisfiable(&c0, pset)? || !key_satisfiable(&c1, pset)? {
                    next.push((k, origin));
                    continue;
                }
                let parent = pages_of(rel, pset, &k, &new_stats)?;
                let p0 = pages_of(rel, pset, &c0, &new_stats)?;
                let p1 = pages_of(rel, pset, &c1, &new_stats)?;
                let (small, small_pages) = if p1.0 < p0.0 { (&c1, p1.1) } else { (&c0, p0.1) };
                let read_pages = match read {
                    SplitRead::Parent => parent.1,
                    SplitRead::Smaller => small_pages,
                };
                splits.push(SplitEntry {
                    relation: rel.clone(),
                    parent: original
                        .get(&k)
                        .cloned()
                        .unwrap_or_else(|| crate::fragmodel::fragment_id(rel, &k)),
                    children: vec![crate::fragmodel::fragment_id(rel, &c0), crate::fragmodel::fragment_id(rel, &c1)],
                    written: vec![crate::fragmodel::fragment_id(rel, small)],
                    cost: read_pages + small_pages,
                });
                next.push((c0, origin));
                next.push((c1, origin));
            }
            current = next;
        }
        let mut lin = vec![Vec::new(); keys.len()];
        for (i, (_, origin)) in current.iter().enumerate() {
            lin[*origin].push(i);
        }
        lineage.insert(rel.clone(), lin);
        *keys = current.into_iter().map(|(k, _)| k).collect();
    }
    let new_schema = PartitionSchema::new(def, assign)?;

    if let Some(star) = &schema.star {
        if added.keys().any(|r| star.is_dimension(r)) {
            let fact = &schema.relations[&star.fact];
            let new_fact = &new_schema.relations[&star.fact];
            for i in 0..fact.fragments.len() {
                let comps = schema.fact_components(i);
                // children: cross product of each dimension component's children
                let mut children: Vec<Vec<usize>> = vec![Vec::new()];
                for (c, d) in comps.iter().zip(&star.dimensions) {
                    let options = lineage.get(d).map_or_else(|| vec![*c], |l| l[*c].clone());
                    children = children
                        .into_iter()
                        .flat_map(|p| {
                            options.iter().map(move |o| {
                                let mut q = p.clone();
                                q.push(*o);
                                q
                            })
                        })
                        .collect();
                }
                if children.len() < 2 {
                    continue;
                }
                let pset = &new_fact.pset;
                let ids: Vec<&crate::fragmodel::Fragment> = children
                    .iter()
                    .map(|c| &new_fact.fragments[new_schema.fact_fragment_index(c)])
                    .collect();
                let sizes: Vec<(u64, u64)> = ids
                    .iter()
                    .map(|f| pages_of(&star.fact, pset, &f.key, &new_stats))
                    .collect::<Result<_>>()?;
                let (largest, _) = merge_group_cost(&sizes);
                let written: Vec<usize> = (0..ids.len()).filter(|&j| j != largest).collect();
                let write_pages: u64 = written.iter().map(|&j| sizes[j].1).sum();
                let parent_pages = pages_of(&star.fact, &fact.pset, &fact.fragments[i].key, stats)?.1;
                let read_pages = match read {
                    SplitRead::Parent => parent_pages,
                    SplitRead::Smaller => write_pages,
                };
                splits.push(SplitEntry {
                    relation: star.fact.clone(),
                    parent: fact.fragments[i].id.clone(),
                    children: ids.iter().map(|f| f.id.clone()).collect(),
                    written: written.iter().map(|&j| ids[j].id.clone()).collect(),
                    cost: read_pages + write_pages,
                });
            }
        }
    }
    let cost = splits.iter().map(|s| s.cost).sum();
    Ok(SplitPlan {
        added: added.into_values().flatten().collect(),
        splits,
        schema: new_schema,
        cost,
        stats: Some(new_stats),
        base,
    })
}

/// Replaces the schema by the plan's result and re-derives catalog records
/// of the fragments the plan touched; all other records are kept as is.
pub fn apply_adaptation(
    plan: &AdaptationPlan,
    current: &PartitionSchema,
    store: &CatalogStore,
    stats: &DatasetStats,
) -> Result<AdaptationResult> {
    if plan.base() != current.to_toml() {
        return Err(Error::Stale("the schema changed since the plan was computed".into()));
    }
    let new_stats = match plan {
        AdaptationPlan::Split(SplitPlan { stats: Some(s), .. }) => s.clone(),
        _ => stats.clone(),
    };
    let mut affected = BTreeSet::new();
    match plan {
        AdaptationPlan::Merge(p) => affected.extend(p.groups.iter().map(|g| g.result.clone())),
        AdaptationPlan::Split(p) => {
            for s in &p.splits {
                affected.extend(s.children.iter().cloned());
            }
        }
    }
    let schema = plan.schema().clone();
    let store = if new_stats.epoch != store.epoch {
        // every record must come from the new statistics
        let all: BTreeSet<String> = schema.fragments().map(|(_, f)| f.id.clone()).collect();
        let stale = CatalogStore {
            epoch: new_stats.epoch,
            ..Default::default()
        };
        refresh_catalog(&stale, &schema, &new_stats, &all)?
    } else {
        refresh_catalog(store, &schema, &new_stats, &affected)?
    };
    Ok(AdaptationResult {
        psets: schema.psets(),
        schema,
        store,
        stats: new_stats,
    })
}

/// Rebuilds every statistics artifact from new data over the same predicate
/// sets; the epoch advances so catalog stores derived earlier become stale.
pub fn refresh_statistics(dataset: &Dataset, previous: &DatasetStats) -> Result<DatasetStats> {
    for r in &dataset.schema.relations {
        if let Some(old) = previous.relations.get(&r.name) {
            if old.def != *r {
                return Err(Error::Ingest(format!("relation '{}' changed its definition", r.name)));
            }
        }
    }
    let psets = previous.psets();
    let mut fresh = DatasetStats::build(dataset, &psets, previous.target)?;
    fresh.epoch = previous.epoch + 1;
    Ok(fresh)
}
