//! Genetic search over partitioned schemas, the exhaustive oracle for small
//! instances and tuple relocation costs.

mod exhaustive;
mod relocation;
mod repair;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exhaustive::{exhaustive_baseline, EXHAUSTIVE_LIMIT};
pub use relocation::{relocation_cost, Relocation};
pub use repair::{apply_merge, Piece, Slice};

use crate::catalog::{derive_fragment_records, AttributeCatalogRecord, AttributeScope, CatalogStore, RelationCatalogRecord};
use crate::costmodel::{cost_scope, prepare_workload, prepared_workload_costs, CostParams, PreparedQuery};
use crate::data::SchemaDef;
use crate::error::{Error, Result};
use crate::fragmodel::{satisfiable_cells, Fragment, FragmentKey, PartitionSchema, RelationScheme, StarSchemaDef};
use crate::stats::DatasetStats;
use crate::workload::{PredicateSet, QueryShape};

/// Cost-equivalent weight floor so that zero-cost schemas stay selectable.
const SELECTION_DELTA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub mutation: f64,
    pub elitism: usize,
    pub max_fragments: usize,
    /// Tuple relocation budget; only used in re-partitioning mode.
    pub max_relocation: Option<u64>,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 20,
            generations: 30,
            mutation: 0.1,
            elitism: 2,
            max_fragments: 64,
            max_relocation: None,
            seed: 42,
        }
    }
}

impl GaParams {
    pub fn check(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("population must be at least 2".into()));
        }
        if self.elitism >= self.population {
            return Err(Error::Config("elitism must be smaller than the population".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation) {
            return Err(Error::Config("mutation probability must lie in [0, 1]".into()));
        }
        if self.max_fragments == 0 {
            return Err(Error::Config("fragment budget must be at least 1".into()));
        }
        Ok(())
    }
}

/// Composite genes of equal length, one ternary digit per predicate position
/// across all partitionable relations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<Vec<u8>>,
}

impl Chromosome {
    pub fn flatten(&self) -> Vec<u8> {
        self.genes.concat()
    }

    pub fn from_flat(flat: &[u8], gene_len: usize) -> Self {
        if gene_len == 0 {
            return Chromosome { genes: vec![Vec::new(); flat.len().max(1)] };
        }
        Chromosome {
            genes: flat.chunks(gene_len).map(<[u8]>::to_vec).collect(),
        }
    }

    pub fn digit_len(&self) -> usize {
        self.genes.iter().map(Vec::len).sum()
    }
}

/// Single-point crossover on the flattened digit strings: the suffixes from
/// `point` on are swapped. Parents may hold different gene counts; total
/// length is preserved across the pair.
pub fn crossover(a: &Chromosome, b: &Chromosome, point: usize, gene_len: usize) -> Result<(Chromosome, Chromosome)> {
    let fa = a.flatten();
    let fb = b.flatten();
    let limit = fa.len().min(fb.len());
    if point == 0 || point >= limit {
        return Err(Error::OutOfRange(format!(
            "crossover point {point} outside 1..{limit}"
        )));
    }
    let ca: Vec<u8> = fa[..point].iter().chain(&fb[point..]).copied().collect();
    let cb: Vec<u8> = fb[..point].iter().chain(&fa[point..]).copied().collect();
    Ok((Chromosome::from_flat(&ca, gene_len), Chromosome::from_flat(&cb, gene_len)))
}

/// Replaces each digit with probability `p` by a different digit drawn
/// uniformly.
pub fn mutate(ch: &Chromosome, p: f64, rng: &mut impl Rng) -> Chromosome {
    let mut out = ch.clone();
    for g in &mut out.genes {
        for d in g.iter_mut() {
            if rng.gen_bool(p) {
                *d = (*d + rng.gen_range(1..=2)) % 3;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Penalty {
    /// Fragments above the budget left after repair.
    pub fragment_excess: usize,
    /// Relocated tuples above the relocation budget.
    pub relocation_excess: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub chromosome: Chromosome,
    #[serde(skip)]
    pub schema: Option<PartitionSchema>,
    /// Workload cost; +inf for infeasible records.
    pub cost: f64,
    /// Workload cost regardless of feasibility.
    pub raw_cost: f64,
    pub feasible: bool,
    pub fragments: usize,
    pub relocated: Option<u64>,
    pub penalty: Penalty,
}

impl FitnessRecord {
    /// Feasible records first, then by ascending cost.
    fn rank_key(&self) -> (bool, f64) {
        (!self.feasible, self.cost)
    }
}

fn better(a: &FitnessRecord, b: &FitnessRecord) -> bool {
    a.rank_key().partial_cmp(&b.rank_key()) == Some(std::cmp::Ordering::Less)
}

type CachedRecords = Arc<(RelationCatalogRecord, Vec<AttributeCatalogRecord>)>;

/// Everything a fitness evaluation needs: predicate slices with their
/// satisfiable cells, statistics, the prepared workload and caches.
pub struct Problem<'a> {
    pub def: &'a SchemaDef,
    pub stats: &'a DatasetStats,
    pub queries: Vec<PreparedQuery>,
    pub cost_params: CostParams,
    pub star: Option<StarSchemaDef>,
    pub slices: Vec<Slice>,
    /// Single-fragment schemes of relations outside every slice.
    fixed: BTreeMap<String, RelationScheme>,
    scope: AttributeScope,
    /// Current schema in re-partitioning mode.
    pub current: Option<PartitionSchema>,
    records: Mutex<HashMap<String, CachedRecords>>,
    costs: Mutex<HashMap<String, f64>>,
}

impl<'a> Problem<'a> {
    /// Sets up a problem over the statistics' predicate sets. In star mode
    /// the dimensions come first (in star order), then other relations by
    /// name; the fact is always derived.
    pub fn new(def: &'a SchemaDef, stats: &'a DatasetStats, workload: &[QueryShape], cost_params: CostParams) -> Result<Self> {
        let star = StarSchemaDef::from_schema_def(def);
        let mut names: Vec<String> = Vec::new();
        if let Some(s) = &star {
            names.extend(s.dimensions.iter().cloned());
        }
        for r in &def.relations {
            let is_star = star.as_ref().is_some_and(|s| s.fact == r.name || s.is_dimension(&r.name));
            if !is_star {
                names.push(r.name.clone());
            }
        }
        let mut slices = Vec::new();
        let mut fixed = BTreeMap::new();
        let mut start = 0;
        for name in names {
            let rs = stats.relation(&name)?;
            let pset = rs.pset.clone();
            if pset.m() == 0 {
                fixed.insert(name.clone(), single_scheme(&name, pset));
                continue;
            }
            let cells = satisfiable_cells(&pset)?;
            let cards = cells
                .iter()
                .map(|c| rs.mdh.cells.get(c).map_or(0, |r| r.tuples))
                .collect();
            let len = pset.m();
            slices.push(Slice {
                relation: name,
                pset,
                start,
                len,
                cells,
                cards,
            });
            start += len;
        }
        Ok(Problem {
            def,
            stats,
            queries: prepare_workload(workload)?,
            cost_params,
            star,
            slices,
            fixed,
            scope: cost_scope(workload, def),
            current: None,
            records: Mutex::new(HashMap::new()),
            costs: Mutex::new(HashMap::new()),
        })
    }

    /// Switches to re-partitioning mode against `current`.
    pub fn with_current(mut self, current: PartitionSchema) -> Self {
        self.current = Some(current);
        self
    }

    pub fn gene_len(&self) -> usize {
        self.slices.iter().map(|s| s.len).sum()
    }

    /// log2 of the raw representation space for up to `w` binary genes:
    /// `w * Σ m_i`.
    pub fn search_space_log2(&self, w: usize) -> f64 {
        (w * self.gene_len()) as f64
    }

    fn count(&self, pieces: &[Vec<Piece>]) -> usize {
        let fixed_count = self.fixed.len();
        match &self.star {
            Some(star) => {
                let mut product = 1usize;
                let mut other = 0usize;
                for (s, p) in self.slices.iter().zip(pieces) {
                    if star.is_dimension(&s.relation) {
                        product = product.saturating_mul(p.len());
                    } else {
                        other += p.len();
                    }
                }
                // the fact is derived; fixed dimensions contribute a factor of one
                let fixed_other = self
                    .fixed
                    .keys()
                    .filter(|n| !star.is_dimension(n))
                    .count();
                product + other + fixed_other
            }
            None => pieces.iter().map(Vec::len).sum::<usize>() + fixed_count,
        }
    }

    /// Decodes and repairs a chromosome into a valid schema, merging
    /// fragments until the budget holds or nothing can be merged. Each step
    /// merges the pair with the smallest share of its relation's tuples.
    /// Returns the schema and its fragment count.
    pub fn decode(&self, ch: &Chromosome, max_fragments: usize) -> Result<(PartitionSchema, usize)> {
        let mut pieces: Vec<Vec<Piece>> = self
            .slices
            .iter()
            .map(|s| {
                let genes: Vec<FragmentKey> = ch
                    .genes
                    .iter()
                    .filter(|g| g.len() >= s.start + s.len)
                    .map(|g| FragmentKey::new(g[s.start..s.start + s.len].to_vec()))
                    .collect::<Result<_>>()?;
                Ok(s.decode(&genes))
            })
            .collect::<Result<_>>()?;
        while self.count(&pieces) > max_fragments {
            let mut best: Option<(f64, usize, Vec<usize>, FragmentKey)> = None;
            for (si, s) in self.slices.iter().enumerate() {
                if pieces[si].len() < 2 {
                    continue;
                }
                if let Some((card, members, key)) = s.best_merge(&pieces[si]) {
                    // relations differ in size; compare shares of each relation
                    let total: u64 = s.cards.iter().sum();
                    let card = card as f64 / total.max(1) as f64;
                    if best.as_ref().map_or(true, |b| card < b.0) {
                        best = Some((card, si, members, key));
                    }
                }
            }
            let Some((_, si, members, key)) = best else { break };
            apply_merge(&mut pieces[si], &members, key);
        }
        let count = self.count(&pieces);
        let mut relations = self.fixed.clone();
        for (s, p) in self.slices.iter().zip(pieces) {
            relations.insert(
                s.relation.clone(),
                RelationScheme {
                    pset: s.pset.clone(),
                    fragments: p.into_iter().map(|x| Fragment::new(&s.relation, x.key)).collect(),
                    derived: false,
                },
            );
        }
        if let Some(star) = &self.star {
            relations.remove(&star.fact);
        }
        Ok((PartitionSchema::from_validated(self.star.clone(), relations)?, count))
    }

    /// Catalog of a schema restricted to the attributes the cost model
    /// reads, with per-fragment records cached across evaluations.
    pub fn catalog(&self, schema: &PartitionSchema) -> Result<CatalogStore> {
        let mut store = CatalogStore {
            epoch: self.stats.epoch,
            ..Default::default()
        };
        for (rel, s) in &schema.relations {
            for f in &s.fragments {
                let cached = self.records.lock().expect("cache lock").get(&f.id).cloned();
                let rec = match cached {
                    Some(r) => r,
                    None => {
                        let sc = self.scope.get(rel).map_or(&[][..], Vec::as_slice);
                        let r = Arc::new(derive_fragment_records(rel, &f.id, &s.pset, &f.key, self.stats, Some(sc))?);
                        self.records.lock().expect("cache lock").insert(f.id.clone(), r.clone());
                        r
                    }
                };
                store.insert(rec.0.clone(), rec.1.clone());
            }
        }
        Ok(store)
    }

    /// Workload cost of a schema (cached by its fragment list).
    pub fn schema_cost(&self, schema: &PartitionSchema) -> Result<f64> {
        let sig = schema_signature(schema);
        if let Some(c) = self.costs.lock().expect("cache lock").get(&sig) {
            return Ok(*c);
        }
        let store = self.catalog(schema)?;
        let cost = prepared_workload_costs(&self.queries, schema, &store, &self.cost_params, Some(self.def))?
            .iter()
            .map(|c| c.total)
            .sum();
        self.costs.lock().expect("cache lock").insert(sig, cost);
        Ok(cost)
    }

    /// The single-fragment schema over the problem's predicate sets.
    pub fn baseline_schema(&self) -> Result<PartitionSchema> {
        let psets: BTreeMap<String, PredicateSet> = self.stats.psets();
        PartitionSchema::unpartitioned(self.def, &psets)
    }

    pub fn evaluate(&self, ch: &Chromosome, params: &GaParams) -> Result<FitnessRecord> {
        let (schema, fragments) = self.decode(ch, params.max_fragments)?;
        let raw_cost = self.schema_cost(&schema)?;
        let mut penalty = Penalty {
            fragment_excess: fragments.saturating_sub(params.max_fragments),
            relocation_excess: 0,
        };
        let mut relocated = None;
        if let (Some(current), Some(limit)) = (&self.current, params.max_relocation) {
            let l = relocation_cost(current, &schema, self.stats)?;
            penalty.relocation_excess = l.tuples.saturating_sub(limit);
            relocated = Some(l.tuples);
        }
        let feasible = penalty.fragment_excess == 0 && penalty.relocation_excess == 0;
        Ok(FitnessRecord {
            chromosome: ch.clone(),
            schema: Some(schema),
            cost: if feasible { raw_cost } else { f64::INFINITY },
            raw_cost,
            feasible,
            fragments,
            relocated,
            penalty,
        })
    }

    /// `population` random chromosomes, each with a gene count drawn from
    /// `[1, W]`. Within a relation of `m` predicates each digit is fixed (0 or
    /// 1, evenly) with probability `1/m` and don't-care otherwise, so a gene
    /// pins about one predicate per relation.
    pub fn seed_population(&self, params: &GaParams, rng: &mut impl Rng) -> Vec<Chromosome> {
        let fix: Vec<f64> = self
            .slices
            .iter()
            .flat_map(|s| std::iter::repeat(1.0 / s.len as f64).take(s.len))
            .collect();
        (0..params.population)
            .map(|_| {
                let n = rng.gen_range(1..=params.max_fragments);
                Chromosome {
                    genes: (0..n)
                        .map(|_| {
                            fix.iter()
                                .map(|&p| if rng.gen_bool(p) { rng.gen_range(0..2u8) } else { 2 })
                                .collect()
                        })
                        .collect(),
                }
            })
            .collect()
    }

    fn evaluate_all(&self, pop: &[Chromosome], params: &GaParams) -> Result<Vec<FitnessRecord>> {
        pop.par_iter().map(|c| self.evaluate(c, params)).collect()
    }
}

fn single_scheme(name: &str, pset: PredicateSet) -> RelationScheme {
    let key = FragmentKey::all_two(pset.m());
    RelationScheme {
        pset,
        fragments: vec![Fragment::new(name, key)],
        derived: false,
    }
}

fn schema_signature(schema: &PartitionSchema) -> String {
    let mut s = String::new();
    for (rel, r) in &schema.relations {
        if r.derived {
            continue;
        }
        s.push_str(rel);
        for f in &r.fragments {
            s.push(':');
            s.push_str(&f.key.to_string());
        }
        s.push(';');
    }
    s
}

/// One line of the generation trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub generation: usize,
    /// Best cost seen so far (non-increasing).
    pub best_cost: f64,
    /// Mean cost of the generation's feasible records.
    pub mean_cost: f64,
    pub feasible_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: FitnessRecord,
    pub trace: Vec<TraceEntry>,
}

impl GaOutcome {
    /// Tab-separated trace with a header line.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("generation\tbest_cost\tmean_cost\tfeasible_fraction\n");
        for t in &self.trace {
            writeln!(out, "{}\t{}\t{}\t{}", t.generation, t.best_cost, t.mean_cost, t.feasible_fraction).unwrap();
        }
        out
    }
}

fn trace_entry(generation: usize, best: &FitnessRecord, records: &[FitnessRecord]) -> TraceEntry {
    let feasible: Vec<f64> = records.iter().filter(|r| r.feasible).map(|r| r.cost).collect();
    TraceEntry {
        generation,
        best_cost: best.cost,
        mean_cost: if feasible.is_empty() {
            f64::INFINITY
        } else {
            feasible.iter().sum::<f64>() / feasible.len() as f64
        },
        feasible_fraction: feasible.len() as f64 / records.len().max(1) as f64,
    }
}

/// Runs the genetic search. Generation 0 is the seed population.
pub fn evolve(problem: &Problem, params: &GaParams) -> Result<GaOutcome> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let gene_len = problem.gene_len();
    let pop = problem.seed_population(params, &mut rng);
    let mut records = problem.evaluate_all(&pop, params)?;
    let mut best = best_of(&records).clone();
    let mut trace = vec![trace_entry(0, &best, &records)];
    for generation in 1..=params.generations {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[a].rank_key().partial_cmp(&records[b].rank_key()).expect("costs are not NaN"));
        let mut next: Vec<Chromosome> = order[..params.elitism]
            .iter()
            .map(|&i| records[i].chromosome.clone())
            .collect();
        let weights: Vec<f64> = if records.iter().any(|r| r.feasible) {
            records
                .iter()
                .map(|r| if r.feasible { 1.0 / (r.cost + SELECTION_DELTA) } else { 0.0 })
                .collect()
        } else {
            vec![1.0; records.len()]
        };
        let wheel = WeightedIndex::new(&weights).map_err(|e| Error::Consistency(format!("selection weights: {e}")))?;
        while next.len() < params.population {
            let a = &records[wheel.sample(&mut rng)].chromosome;
            let b = &records[wheel.sample(&mut rng)].chromosome;
            let limit = a.digit_len().min(b.digit_len());
            let (ca, cb) = if limit >= 2 {
                let point = rng.gen_range(1..limit);
                crossover(a, b, point, gene_len)?
            } else {
                (a.clone(), b.clone())
            };
            next.push(mutate(&ca, params.mutation, &mut rng));
            if next.len() < params.population {
                next.push(mutate(&cb, params.mutation, &mut rng));
            }
        }
        records = problem.evaluate_all(&next, params)?;
        let gen_best = best_of(&records);
        if better(gen_best, &best) {
            best = gen_best.clone();
        }
        trace.push(trace_entry(generation, &best, &records));
    }
    Ok(GaOutcome { best, trace })
}

fn best_of(records: &[FitnessRecord]) -> &FitnessRecord {
    records
        .iter()
        .reduce(|a, b| if better(b, a) { b } else { a })
        .expect("non-empty population")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossover_splices_suffixes() {
        let a = Chromosome { genes: vec![vec![0, 0, 0, 1, 1, 0]] };
        let b = Chromosome { genes: vec![vec![1, 1, 1, 0, 0, 1]] };
        let (x, y) = crossover(&a, &b, 3, 6).unwrap();
        assert_eq!(x.flatten(), vec![0, 0, 0, 0, 0, 1]);
        assert_eq!(y.flatten(), vec![1, 1, 1, 1, 1, 0]);
        let (x, _) = crossover(&a, &b, 5, 6).unwrap();
        assert_eq!(x.flatten(), vec![0, 0, 0, 1, 1, 1]);
        let (x, y) = crossover(&a, &a, 2, 6).unwrap();
        assert_eq!((x.clone(), y), (a.clone(), a.clone()));
        assert!(crossover(&a, &b, 6, 6).is_err());
        assert!(crossover(&a, &b, 0, 6).is_err());
    }

    #[test]
    fn mutation_extremes_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = Chromosome { genes: vec![vec![0, 1, 2, 0, 1, 2]; 3] };
        assert_eq!(mutate(&c, 0.0, &mut rng), c);
        let all = mutate(&c, 1.0, &mut rng);
        assert!(all.flatten().iter().zip(c.flatten()).all(|(a, b)| *a != b));
        let len = c.digit_len() as f64;
        let trials = 2000;
        let p = 0.1;
        let changed: usize = (0..trials)
            .map(|_| {
                let m = mutate(&c, p, &mut rng);
                m.flatten().iter().zip(c.flatten()).filter(|(a, b)| **a != *b).count()
            })
            .sum();
        let mean = changed as f64 / trials as f64;
        let sd = (len * p * (1.0 - p) / trials as f64).sqrt();
        assert!((mean - len * p).abs() < 3.0 * sd, "mean {mean}");
    }
}
