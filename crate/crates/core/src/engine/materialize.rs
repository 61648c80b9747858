//! Physical fragments: every tuple routed to its fragment, with exact
//! statistics computed from the fragment contents.

use std::collections::BTreeMap;

use crate::catalog::{AttributeCatalogRecord, CatalogStore, RelationCatalogRecord};
use crate::data::{Dataset, RelationData};
use crate::error::{Error, Result};
use crate::fragmodel::{Cell, PartitionSchema, RelationScheme};
use crate::stats::{build_parent_stats, ParentStats};

#[derive(Debug, Clone)]
pub struct MaterializedFragment {
    pub id: String,
    /// Row ids into the base relation, ascending.
    pub rows: Vec<u32>,
    pub stats: ParentStats,
}

#[derive(Debug, Clone)]
pub struct MaterializedRelation {
    pub fragments: Vec<MaterializedFragment>,
    /// Fragment index of every base row.
    pub row_fragment: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct MaterializedSchema<'a> {
    pub data: &'a Dataset,
    pub schema: PartitionSchema,
    pub relations: BTreeMap<String, MaterializedRelation>,
}

impl MaterializedSchema<'_> {
    pub fn relation(&self, name: &str) -> Result<&MaterializedRelation> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::Schema(format!("relation '{name}' is not materialized")))
    }

    /// Catalog records computed from the real fragment contents.
    pub fn exact_catalog(&self) -> CatalogStore {
        let mut store = CatalogStore::default();
        for (rel, m) in &self.relations {
            for f in &m.fragments {
                let attrs = f
                    .stats
                    .attributes
                    .iter()
                    .map(|a| AttributeCatalogRecord {
                        fragment: f.id.clone(),
                        attribute: a.attribute.clone(),
                        stadistinct: a.stadistinct,
                        width: a.width,
                        mcv_values: a.mcv_values.clone(),
                        mcv_freqs: a.mcv_freqs.clone(),
                        histogram: a.histogram.clone(),
                    })
                    .collect();
                store.insert(
                    RelationCatalogRecord {
                        fragment: f.id.clone(),
                        relation: rel.clone(),
                        reltuples: f.stats.tuples,
                        relpages: f.stats.pages,
                    },
                    attrs,
                );
            }
        }
        store
    }
}

/// Cell of every row of a non-derived relation, by direct predicate evaluation.
fn row_cells(data: &RelationData, scheme: &RelationScheme) -> Result<Vec<Cell>> {
    let cols: Vec<&[crate::value::Value]> = scheme
        .pset
        .iter()
        .map(|p| {
            data.column(&p.attribute)
                .ok_or_else(|| Error::Schema(format!("unknown attribute '{}.{}'", data.name(), p.attribute)))
        })
        .collect::<Result<_>>()?;
    Ok((0..data.len())
        .map(|row| {
            let mut bits = 0u128;
            for (i, (p, col)) in scheme.pset.iter().zip(&cols).enumerate() {
                if p.holds(&col[row]) {
                    bits |= 1 << i;
                }
            }
            Cell::new(bits, scheme.pset.m())
        })
        .collect())
}

fn route_by_cells(relation: &str, cells: &[Cell], scheme: &RelationScheme) -> Result<Vec<u32>> {
    let mut cache: BTreeMap<Cell, u32> = BTreeMap::new();
    cells
        .iter()
        .map(|c| {
            if let Some(&f) = cache.get(c) {
                return Ok(f);
            }
            let f = scheme
                .fragments
                .iter()
                .position(|f| f.key.covers_unchecked(c))
                .ok_or_else(|| Error::Coverage {
                    cell: format!("{relation}:{c}"),
                })? as u32;
            cache.insert(*c, f);
            Ok(f)
        })
        .collect()
}

fn fragment_data(data: &RelationData, rows: &[u32]) -> RelationData {
    let columns = data
        .columns
        .iter()
        .map(|col| rows.iter().map(|&r| col[r as usize].clone()).collect())
        .collect();
    RelationData {
        def: data.def.clone(),
        columns,
    }
}

/// Routes every tuple of every relation to its unique fragment and computes
/// exact per-fragment statistics with the given statistics target. Derived
/// fact tuples follow the fragments of the dimension rows they reference.
pub fn materialize<'a>(schema: &PartitionSchema, data: &'a Dataset, target: usize) -> Result<MaterializedSchema<'a>> {
    let mut routing: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for (rel, scheme) in schema.relations.iter().filter(|(_, s)| !s.derived) {
        let rd = data.relation(rel)?;
        let cells = row_cells(rd, scheme)?;
        routing.insert(rel.clone(), route_by_cells(rel, &cells, scheme)?);
    }
    if let Some(star) = &schema.star {
        if let Some(fact) = schema.scheme(&star.fact).filter(|s| s.derived) {
            let maps: Vec<Vec<u32>> = star
                .edges
                .iter()
                .map(|e| data.fk_row_map(e))
                .collect::<Result<_>>()?;
            let n = data.relation(&star.fact)?.len();
            let mut out = Vec::with_capacity(n);
            let mut comps = vec![0usize; star.dimensions.len()];
            for row in 0..n {
                for (slot, (d, map)) in star.dimensions.iter().zip(&maps).enumerate() {
                    comps[slot] = routing[d][map[row] as usize] as usize;
                }
                out.push(schema.fact_fragment_index(&comps) as u32);
            }
            debug_assert!(out.iter().all(|&f| (f as usize) < fact.fragments.len()));
            routing.insert(star.fact.clone(), out);
        }
    }

    let mut relations = BTreeMap::new();
    for (rel, row_fragment) in routing {
        let scheme = &schema.relations[&rel];
        let rd = data.relation(&rel)?;
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); scheme.fragments.len()];
        for (r, &f) in row_fragment.iter().enumerate() {
            rows[f as usize].push(r as u32);
        }
        let fragments = scheme
            .fragments
            .iter()
            .zip(rows)
            .map(|(f, rows)| {
                let stats = build_parent_stats(&fragment_data(rd, &rows), target)?;
                Ok(MaterializedFragment {
                    id: f.id.clone(),
                    rows,
                    stats,
                })
            })
            .collect::<Result<_>>()?;
        relations.insert(rel, MaterializedRelation { fragments, row_fragment });
    }
    Ok(MaterializedSchema {
        data,
        schema: schema.clone(),
        relations,
    })
}
