use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::key::{Cell, FragmentKey};
use super::sat::satisfiable_cells;
use crate::data::{ForeignKey, SchemaDef};
use crate::error::{Error, Result};
use crate::workload::{parse_atomic, PredicateSet};

/// Fragment naming convention: `<relation>__<digits>`.
pub fn fragment_id(relation: &str, key: &FragmentKey) -> String {
    format!("{relation}__{key}")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fragment {
    pub id: String,
    pub key: FragmentKey,
}

impl Fragment {
    pub fn new(relation: &str, key: FragmentKey) -> Self {
        Fragment {
            id: fragment_id(relation, &key),
            key,
        }
    }
}

/// Map from satisfiable cells to the index of the fragment covering them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTable {
    pub entries: BTreeMap<Cell, usize>,
    pub fragment_ids: Vec<String>,
}

impl IndexTable {
    pub fn lookup(&self, cell: &Cell) -> Option<usize> {
        self.entries.get(cell).copied()
    }

    pub fn fragment_of(&self, cell: &Cell) -> Option<&str> {
        self.lookup(cell).map(|i| self.fragment_ids[i].as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Checks that `keys` cover every satisfiable cell of `pset` exactly once.
pub fn validate_schema(relation: &str, keys: &[FragmentKey], pset: &PredicateSet) -> Result<IndexTable> {
    let cells = satisfiable_cells(pset)?;
    validate_over_cells(relation, keys, pset.m(), &cells)
}

/// As [`validate_schema`] with the satisfiable cells supplied by the caller.
pub fn validate_over_cells(
    relation: &str,
    keys: &[FragmentKey],
    m: usize,
    cells: &[Cell],
) -> Result<IndexTable> {
    let ids: Vec<String> = keys.iter().map(|k| fragment_id(relation, k)).collect();
    for (i, k) in keys.iter().enumerate() {
        if k.len() != m {
            return Err(Error::Consistency(format!(
                "fragment {} has {} digits, expected {m}",
                ids[i],
                k.len()
            )));
        }
        if keys[..i].contains(k) {
            return Err(Error::Consistency(format!("duplicate fragment {}", ids[i])));
        }
    }
    // overlaps are reported before gaps
    let mut entries = BTreeMap::new();
    let mut uncovered = None;
    for cell in cells {
        let mut owner: Option<usize> = None;
        for (i, k) in keys.iter().enumerate() {
            if k.covers_unchecked(cell) {
                if let Some(first) = owner {
                    return Err(Error::Overlap {
                        cell: cell.to_string(),
                        first: ids[first].clone(),
                        second: ids[i].clone(),
                    });
                }
                owner = Some(i);
            }
        }
        match owner {
            Some(i) => {
                entries.insert(*cell, i);
            }
            None => {
                uncovered.get_or_insert(*cell);
            }
        }
    }
    if let Some(cell) = uncovered {
        return Err(Error::Coverage {
            cell: format!("{relation}:{cell}"),
        });
    }
    Ok(IndexTable {
        entries,
        fragment_ids: ids,
    })
}

/// Star roles: the fact, its dimensions in FK declaration order, and edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarSchemaDef {
    pub fact: String,
    pub dimensions: Vec<String>,
    pub edges: Vec<ForeignKey>,
}

impl StarSchemaDef {
    /// The star declared by a schema-def, if it has a fact with FK edges.
    pub fn from_schema_def(def: &SchemaDef) -> Option<StarSchemaDef> {
        let fact = def.fact()?;
        if def.foreign_keys.is_empty() {
            return None;
        }
        Some(StarSchemaDef {
            fact: fact.name.clone(),
            dimensions: def.foreign_keys.iter().map(|f| f.dimension.clone()).collect(),
            edges: def.foreign_keys.clone(),
        })
    }

    pub fn edge(&self, dimension: &str) -> Option<&ForeignKey> {
        self.edges.iter().find(|e| e.dimension == dimension)
    }

    pub fn is_dimension(&self, relation: &str) -> bool {
        self.dimensions.iter().any(|d| d == relation)
    }

    /// The fact's predicate set: dimension predicates concatenated in
    /// dimension order (each keeps its dimension as relation).
    pub fn lifted_pset(&self, psets: &BTreeMap<String, PredicateSet>) -> PredicateSet {
        let mut out = PredicateSet::new(self.fact.clone());
        for d in &self.dimensions {
            if let Some(p) = psets.get(d) {
                out.predicates.extend(p.predicates.iter().cloned());
            }
        }
        out
    }

    /// `(dimension, start, len)` of each dimension's slice of a fact key.
    pub fn slices(&self, psets: &BTreeMap<String, PredicateSet>) -> Vec<(String, usize, usize)> {
        let mut start = 0;
        self.dimensions
            .iter()
            .map(|d| {
                let len = psets.get(d).map_or(0, PredicateSet::m);
                let s = (d.clone(), start, len);
                start += len;
                s
            })
            .collect()
    }
}

/// One relation's predicate set and validated fragment list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationScheme {
    pub pset: PredicateSet,
    pub fragments: Vec<Fragment>,
    /// Fact fragments derived from the dimensions rather than chosen.
    pub derived: bool,
}

impl RelationScheme {
    pub fn keys(&self) -> Vec<FragmentKey> {
        self.fragments.iter().map(|f| f.key.clone()).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.fragments.iter().position(|f| f.id == id)
    }
}

/// Cross product of dimension fragment lists; the first dimension varies
/// slowest. Each fact key concatenates one key per dimension.
pub fn derive_fact_keys(
    dims: &[(&str, &RelationScheme)],
    star: &StarSchemaDef,
) -> Result<Vec<FragmentKey>> {
    for (name, _) in dims {
        if !star.is_dimension(name) {
            return Err(Error::Schema(format!(
                "'{name}' is not a dimension of fact '{}'",
                star.fact
            )));
        }
    }
    let mut out: Vec<Vec<&FragmentKey>> = vec![vec![]];
    for (_, scheme) in dims {
        let mut next = Vec::with_capacity(out.len() * scheme.fragments.len());
        for prefix in &out {
            for f in &scheme.fragments {
                let mut p = prefix.clone();
                p.push(&f.key);
                next.push(p);
            }
        }
        out = next;
    }
    out.iter().map(|parts| FragmentKey::concat(parts)).collect()
}

/// A validated candidate partitioned schema over every relation of a
/// schema-def.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSchema {
    pub star: Option<StarSchemaDef>,
    pub relations: BTreeMap<String, RelationScheme>,
}

impl PartitionSchema {
    /// Builds and validates a schema. Relations without an assignment get a
    /// single all-2 fragment over an empty predicate set; in star mode the
    /// fact is always derived and any assignment for it is rejected.
    pub fn new(
        def: &SchemaDef,
        mut assignments: BTreeMap<String, (PredicateSet, Vec<FragmentKey>)>,
    ) -> Result<Self> {
        let star = StarSchemaDef::from_schema_def(def);
        let mut relations = BTreeMap::new();
        for rel in &def.relations {
            if star.as_ref().is_some_and(|s| s.fact == rel.name) {
                continue;
            }
            let (pset, keys) = assignments
                .remove(&rel.name)
                .unwrap_or_else(|| (PredicateSet::new(rel.name.clone()), vec![FragmentKey::all_two(0)]));
            if pset.relation != rel.name || pset.iter().any(|p| p.relation != rel.name) {
                return Err(Error::Schema(format!(
                    "predicate set for '{}' references another relation",
                    rel.name
                )));
            }
            validate_schema(&rel.name, &keys, &pset)?;
            let fragments = keys.into_iter().map(|k| Fragment::new(&rel.name, k)).collect();
            relations.insert(
                rel.name.clone(),
                RelationScheme {
                    pset,
                    fragments,
                    derived: false,
                },
            );
        }
        if let Some(extra) = assignments.keys().next() {
            return Err(Error::Schema(format!(
                "cannot assign fragments to '{extra}' (unknown relation or derived fact)"
            )));
        }
        let mut schema = PartitionSchema { star, relations };
        schema.derive_fact()?;
        Ok(schema)
    }

    /// Assembles a schema from relation schemes the caller has already
    /// validated (for instance against cached satisfiable cells) and derives
    /// the fact fragments.
    pub fn from_validated(
        star: Option<StarSchemaDef>,
        relations: BTreeMap<String, RelationScheme>,
    ) -> Result<Self> {
        let mut schema = PartitionSchema { star, relations };
        schema.derive_fact()?;
        Ok(schema)
    }

    /// The single-fragment schema over the given predicate sets.
    pub fn unpartitioned(def: &SchemaDef, psets: &BTreeMap<String, PredicateSet>) -> Result<Self> {
        let star = StarSchemaDef::from_schema_def(def);
        let assignments = def
            .relations
            .iter()
            .filter(|r| !star.as_ref().is_some_and(|s| s.fact == r.name))
            .map(|r| {
                let pset = psets
                    .get(&r.name)
                    .cloned()
                    .unwrap_or_else(|| PredicateSet::new(r.name.clone()));
                let key = FragmentKey::all_two(pset.m());
                (r.name.clone(), (pset, vec![key]))
            })
            .collect();
        PartitionSchema::new(def, assignments)
    }

    /// Recomputes the derived fact fragments from the dimension schemes.
    pub fn derive_fact(&mut self) -> Result<()> {
        let Some(star) = &self.star else {
            return Ok(());
        };
        let psets: BTreeMap<String, PredicateSet> = self
            .relations
            .iter()
            .map(|(n, s)| (n.clone(), s.pset.clone()))
            .collect();
        let dims: Vec<(&str, &RelationScheme)> = star
            .dimensions
            .iter()
            .map(|d| {
                self.relations
                    .get(d)
                    .map(|s| (d.as_str(), s))
                    .ok_or_else(|| Error::Schema(format!("dimension '{d}' has no scheme")))
            })
            .collect::<Result<_>>()?;
        let keys = derive_fact_keys(&dims, star)?;
        let pset = star.lifted_pset(&psets);
        let fragments = keys.into_iter().map(|k| Fragment::new(&star.fact, k)).collect();
        let fact = star.fact.clone();
        self.relations.insert(
            fact,
            RelationScheme {
                pset,
                fragments,
                derived: true,
            },
        );
        Ok(())
    }

    pub fn scheme(&self, relation: &str) -> Option<&RelationScheme> {
        self.relations.get(relation)
    }

    pub fn psets(&self) -> BTreeMap<String, PredicateSet> {
        self.relations
            .iter()
            .map(|(n, s)| (n.clone(), s.pset.clone()))
            .collect()
    }

    /// Dimension fragment indices of a derived fact fragment.
    pub fn fact_components(&self, fact_fragment: usize) -> Vec<usize> {
        let Some(star) = &self.star else {
            return Vec::new();
        };
        let counts: Vec<usize> = star
            .dimensions
            .iter()
            .map(|d| self.relations[d].fragments.len())
            .collect();
        let mut rest = fact_fragment;
        let mut out = vec![0; counts.len()];
        for i in (0..counts.len()).rev() {
            out[i] = rest % counts[i];
            rest /= counts[i];
        }
        out
    }

    /// Fact fragment index for one fragment index per dimension.
    pub fn fact_fragment_index(&self, components: &[usize]) -> usize {
        let star = self.star.as_ref().expect("star schema");
        let mut idx = 0;
        for (d, c) in star.dimensions.iter().zip(components) {
            idx = idx * self.relations[d].fragments.len() + c;
        }
        idx
    }

    /// The fragment count N that the fragment budget W constrains: in star
    /// mode the sub-star fragments plus fragments of relations outside the
    /// star, otherwise the sum over all relations.
    pub fn fragment_count(&self) -> usize {
        match &self.star {
            Some(star) => self
                .relations
                .iter()
                .filter(|(n, _)| !star.is_dimension(n))
                .map(|(_, s)| s.fragments.len())
                .sum(),
            None => self.relations.values().map(|s| s.fragments.len()).sum(),
        }
    }

    pub fn fragments(&self) -> impl Iterator<Item = (&str, &Fragment)> {
        self.relations
            .iter()
            .flat_map(|(n, s)| s.fragments.iter().map(move |f| (n.as_str(), f)))
    }

    pub fn to_toml(&self) -> String {
        let file = SchemaFile {
            relation: self
                .relations
                .iter()
                .map(|(name, s)| RelationEntry {
                    name: name.clone(),
                    derived: s.derived,
                    predicates: if s.derived {
                        Vec::new()
                    } else {
                        s.pset.iter().map(|p| p.to_string()).collect()
                    },
                    fragments: if s.derived {
                        Vec::new()
                    } else {
                        s.fragments.iter().map(|f| f.key.to_string()).collect()
                    },
                })
                .collect(),
        };
        toml::to_string_pretty(&file).expect("schema file serializes")
    }

    pub fn from_toml(text: &str, def: &SchemaDef) -> Result<Self> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("partition schema: {e}")))?;
        let mut assignments = BTreeMap::new();
        for entry in file.relation {
            if entry.derived {
                continue;
            }
            let preds = entry
                .predicates
                .iter()
                .map(|p| parse_atomic(p, def))
                .collect::<Result<Vec<_>>>()?;
            let m = preds.len();
            let pset = PredicateSet::from_predicates(entry.name.clone(), preds);
            if pset.m() != m {
                return Err(Error::Config(format!(
                    "partition schema: duplicate predicate for '{}'",
                    entry.name
                )));
            }
            let keys = entry
                .fragments
                .iter()
                .map(|k| k.parse())
                .collect::<Result<Vec<FragmentKey>>>()?;
            assignments.insert(entry.name, (pset, keys));
        }
        PartitionSchema::new(def, assignments)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path, def: &SchemaDef) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        PartitionSchema::from_toml(&text, def)
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    #[serde(default)]
    relation: Vec<RelationEntry>,
}

#[derive(Serialize, Deserialize)]
struct RelationEntry {
    name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    derived: bool,
    #[serde(default)]
    predicates: Vec<String>,
    #[serde(default)]
    fragments: Vec<String>,
}

/// Global index over concatenated dimension cells of a star schema, mapping
/// each satisfiable concatenated cell to its sub-star fragment id.
pub fn build_global_index(schema: &PartitionSchema) -> Result<IndexTable> {
    const LIMIT: usize = 1 << 22;
    let star = schema
        .star
        .as_ref()
        .ok_or_else(|| Error::Schema("global index requires a star schema".into()))?;
    let mut per_dim = Vec::new();
    for d in &star.dimensions {
        let s = &schema.relations[d];
        let table = validate_schema(d, &s.keys(), &s.pset)?;
        per_dim.push(table);
    }
    let total: usize = per_dim.iter().map(|t| t.len()).product();
    if total > LIMIT {
        return Err(Error::Unsupported(format!(
            "global index would hold {total} entries (limit {LIMIT})"
        )));
    }
    let fact = &schema.relations[&star.fact];
    let mut entries = BTreeMap::new();
    let mut acc: Vec<(Cell, Vec<usize>)> = vec![(Cell::new(0, 0), vec![])];
    for table in &per_dim {
        let mut next = Vec::with_capacity(acc.len() * table.len());
        for (cell, comps) in &acc {
            for (c, &f) in &table.entries {
                let mut comps = comps.clone();
                comps.push(f);
                next.push((cell.concat(c), comps));
            }
        }
        acc = next;
    }
    for (cell, comps) in acc {
        entries.insert(cell, schema.fact_fragment_index(&comps));
    }
    Ok(IndexTable {
        entries,
        fragment_ids: fact.fragments.iter().map(|f| f.id.clone()).collect(),
    })
}
