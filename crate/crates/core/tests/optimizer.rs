mod common;

use hpart::costmodel::CostParams;
use hpart::data::{Dataset, SchemaDef};
use hpart::engine::predicate_sets;
use hpart::fragmodel::FragmentKey;
use hpart::optimizer::{crossover, evolve, exhaustive_baseline, mutate, relocation_cost, Chromosome, GaParams, Problem};
use hpart::stats::{DatasetStats, DEFAULT_STATS_TARGET};
use hpart::workload::{parse_workload, QueryShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{r_schema, star2, toy_pset, toy_r, STAR2_WORKLOAD};

struct Fixture {
    def: SchemaDef,
    stats: DatasetStats,
    workload: Vec<QueryShape>,
}

impl Fixture {
    fn new(ds: &Dataset, sql: &str) -> Self {
        let workload = parse_workload(sql, &ds.schema).unwrap();
        let psets = predicate_sets(ds, &workload).unwrap();
        let stats = DatasetStats::build(ds, &psets, DEFAULT_STATS_TARGET).unwrap();
        Fixture {
            def: ds.schema.clone(),
            stats,
            workload,
        }
    }

    fn problem(&self) -> Problem<'_> {
        Problem::new(&self.def, &self.stats, &self.workload, CostParams::default()).unwrap()
    }
}

fn toy(sql: &str) -> Fixture {
    Fixture::new(&toy_r(), sql)
}

fn fragment_keys(schema: &hpart::fragmodel::PartitionSchema, rel: &str) -> Vec<String> {
    schema.relations[rel].keys().iter().map(FragmentKey::to_string).collect()
}

#[test]
fn seeding_respects_size_and_seed() {
    let f = toy("SELECT count(*) FROM r WHERE a < 6; SELECT count(*) FROM r WHERE a >= 4;");
    let p = f.problem();
    let params = GaParams::default();
    let pop = p.seed_population(&params, &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(pop.len(), params.population);
    assert!(pop.iter().all(|c| (1..=params.max_fragments).contains(&c.genes.len())));
    assert!(pop.iter().flat_map(|c| &c.genes).all(|g| g.len() == 2 && g.iter().all(|d| *d <= 2)));
    let again = p.seed_population(&params, &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(pop, again);

    // a budget of one fragment always decodes to the whole relation
    let one = GaParams {
        max_fragments: 1,
        ..params
    };
    for c in p.seed_population(&one, &mut ChaCha8Rng::seed_from_u64(9)) {
        let (schema, n) = p.decode(&c, 1).unwrap();
        assert_eq!(n, 1);
        assert_eq!(fragment_keys(&schema, "r"), vec!["22"]);
    }
}

#[test]
fn decoding_examples() {
    let f = toy("SELECT count(*) FROM r WHERE a < 6;");
    let p = f.problem();
    let ch = Chromosome { genes: vec![vec![1], vec![0]] };
    let (schema, n) = p.decode(&ch, 64).unwrap();
    assert_eq!(n, 2);
    assert_eq!(fragment_keys(&schema, "r"), vec!["1", "0"]);

    // independent predicates: all four cells are satisfiable
    let f = toy("SELECT count(*) FROM r WHERE a < 6; SELECT count(*) FROM r WHERE t = 'c';");
    let p = f.problem();
    let ch = Chromosome { genes: vec![vec![1, 2], vec![1, 1]] };
    let (schema, _) = p.decode(&ch, 64).unwrap();
    let mut got = fragment_keys(&schema, "r");
    got.sort();
    assert_eq!(got, vec!["02", "12"]);

    let (schema, n) = p.decode(&Chromosome { genes: Vec::new() }, 64).unwrap();
    assert_eq!(n, 1);
    assert_eq!(fragment_keys(&schema, "r"), vec!["22"]);
}

#[test]
fn crossover_and_mutation() {
    let a = Chromosome { genes: vec![vec![0, 0, 0], vec![1, 1, 0]] };
    let b = Chromosome { genes: vec![vec![1, 1, 1], vec![0, 0, 1]] };
    let (x, y) = crossover(&a, &b, 3, 3).unwrap();
    assert_eq!(x.genes, vec![vec![0, 0, 0], vec![0, 0, 1]]);
    assert_eq!(y.genes, vec![vec![1, 1, 1], vec![1, 1, 0]]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(mutate(&a, 0.0, &mut rng), a);
    let flipped = mutate(&a, 1.0, &mut rng);
    assert!(flipped.flatten().iter().zip(a.flatten()).all(|(m, o)| *m != o && *m <= 2));
}

#[test]
fn zero_generations_keep_the_best_seed() {
    let f = toy("SELECT count(*) FROM r WHERE a < 6; SELECT count(*) FROM r WHERE a >= 4;");
    let p = f.problem();
    let params = GaParams {
        generations: 0,
        ..GaParams::default()
    };
    let out = evolve(&p, &params).unwrap();
    assert_eq!(out.trace.len(), 1);
    let seeds = p.seed_population(&params, &mut ChaCha8Rng::seed_from_u64(params.seed));
    let best = seeds
        .iter()
        .map(|c| p.evaluate(c, &params).unwrap().cost)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(out.best.cost, best);
}

#[test]
fn search_matches_the_oracle_on_a_small_star() {
    let ds = star2(60, 40, 6000, 17);
    let f = Fixture::new(&ds, STAR2_WORKLOAD);
    let p = f.problem();
    assert!(p.gene_len() <= hpart::optimizer::EXHAUSTIVE_LIMIT);
    let params = GaParams {
        max_fragments: 16,
        ..GaParams::default()
    };
    let out = evolve(&p, &params).unwrap();
    assert!(out.best.feasible);
    assert!(out.best.fragments <= 16);
    assert!(out.trace.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));

    let (_, oracle) = exhaustive_baseline(&p, 16).unwrap();
    let baseline = p.schema_cost(&p.baseline_schema().unwrap()).unwrap();
    assert!(oracle <= baseline);
    assert!(out.best.cost <= baseline);
    assert!(out.best.cost <= oracle * 1.05, "ga {} oracle {oracle}", out.best.cost);
}

#[test]
fn oracle_without_predicates_is_the_baseline() {
    let f = toy("SELECT count(*) FROM r;");
    let p = f.problem();
    assert_eq!(p.gene_len(), 0);
    let (schema, cost) = exhaustive_baseline(&p, 8).unwrap();
    assert_eq!(fragment_keys(&schema, "r"), vec![""]);
    assert_eq!(cost, p.schema_cost(&p.baseline_schema().unwrap()).unwrap());
}

#[test]
fn relocation_counts_moved_tuples() {
    let f = toy("SELECT count(*) FROM r WHERE a < 6; SELECT count(*) FROM r WHERE a >= 4;");
    let split = r_schema(&toy_pset(), &["12", "02"]);
    let whole = r_schema(&toy_pset(), &["22"]);
    assert_eq!(relocation_cost(&split, &split, &f.stats).unwrap().tuples, 0);
    // one half keeps its file, the other half moves in
    assert_eq!(relocation_cost(&split, &whole, &f.stats).unwrap().tuples, 3);
    assert_eq!(relocation_cost(&whole, &split, &f.stats).unwrap().tuples, 3);
    let fine = r_schema(&toy_pset(), &["10", "11", "01"]);
    let r = relocation_cost(&whole, &fine, &f.stats).unwrap();
    assert_eq!(r.tuples, 3);
    assert!(r.bytes > 0.0);
}
