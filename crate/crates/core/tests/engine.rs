mod common;

use std::collections::{BTreeMap, BTreeSet};

use hpart::costmodel::CostParams;
use hpart::data::{Dataset, SchemaDef};
use hpart::engine::{
    execute_query, generate_star_toy, load_dataset, materialize, predicate_sets, random_schemas, read_csv_relation,
    ssb_schema_def, ssb_workload, validate_simulation, write_dataset,
};
use hpart::optimizer::Problem;
use hpart::stats::{DatasetStats, DEFAULT_STATS_TARGET};
use hpart::value::Value;
use hpart::workload::{parse_workload, PredicateSet, QueryShape};
use proptest::prelude::*;

use common::{finest, r_schema, star2, toy_pset, toy_r, R_DEF, STAR2_WORKLOAD};

fn r_query(sql: &str) -> QueryShape {
    parse_workload(sql, &SchemaDef::from_toml(R_DEF).unwrap()).unwrap().remove(0)
}

fn sorted(mut rows: Vec<Vec<u32>>) -> Vec<Vec<u32>> {
    rows.sort();
    rows
}

#[test]
fn csv_ingest() {
    let def = SchemaDef::from_toml(R_DEF).unwrap();
    let r = def.require("r").unwrap();
    let text = "t,a\naa,1\nbbbb,3\nc,5\ndd,7\ne,9\nff,11\n";
    let data = read_csv_relation(text.as_bytes(), r, "r.csv").unwrap();
    assert_eq!(data.len(), 6);
    assert_eq!(data.row(1), vec![Value::Integer(3), Value::Text("bbbb".into())]);

    let empty = read_csv_relation("a,t\n".as_bytes(), r, "r.csv").unwrap();
    assert_eq!(empty.len(), 0);

    let err = read_csv_relation("a,t\n1,x\noops,y\n".as_bytes(), r, "r.csv").unwrap_err();
    assert!(err.to_string().contains("row 1"), "{err}");
    assert!(read_csv_relation("a\n1\n".as_bytes(), r, "r.csv").is_err());

    let ssb = ssb_schema_def();
    let date = ssb.require("dwdate").unwrap();
    let header: Vec<&str> = date.attributes.iter().map(|a| a.name.as_str()).collect();
    let mut row: Vec<String> = date.attributes.iter().map(|_| "1".to_string()).collect();
    row[0] = "1992-13-45".into();
    let text = format!("{}\n{}\n", header.join(","), row.join(","));
    let err = read_csv_relation(text.as_bytes(), date, "dwdate.csv").unwrap_err();
    assert!(err.to_string().contains("row 0"), "{err}");
}

#[test]
fn dataset_directory_round_trip() {
    let ds = toy_r();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path(), &ds.schema).unwrap();
    let (a, b) = (ds.relation("r").unwrap(), back.relation("r").unwrap());
    assert_eq!(a.len(), b.len());
    assert!((0..a.len()).all(|i| a.row(i) == b.row(i)));
}

fn column(ds: &Dataset, rel: &str, attr: &str) -> Vec<Value> {
    let data = ds.relation(rel).unwrap();
    let pos = ds.schema.require(rel).unwrap().attributes.iter().position(|a| a.name == attr).unwrap();
    (0..data.len()).map(|i| data.row(i)[pos].clone()).collect()
}

#[test]
fn generator_shape() {
    let ds = generate_star_toy(0.002, 42).unwrap();
    assert_eq!(ds.relation("lineorder").unwrap().len(), 12_000);
    let again = generate_star_toy(0.002, 42).unwrap();
    for r in &ds.schema.relations {
        let (a, b) = (ds.relation(&r.name).unwrap(), again.relation(&r.name).unwrap());
        assert_eq!(a.len(), b.len());
        assert!((0..a.len()).all(|i| a.row(i) == b.row(i)), "{} differs", r.name);
    }

    let years: BTreeSet<Value> = column(&ds, "dwdate", "d_year").into_iter().collect();
    assert_eq!(years, (1992..=1998).map(Value::Integer).collect());

    for fk in &ds.schema.foreign_keys {
        let keys: BTreeSet<Value> = column(&ds, &fk.dimension, &fk.dimension_key).into_iter().collect();
        let fact = ds.schema.fact().unwrap().name.clone();
        assert!(
            column(&ds, &fact, &fk.fact_attribute).iter().all(|v| keys.contains(v)),
            "{} has dangling references",
            fk.fact_attribute
        );
    }
    assert!(generate_star_toy(0.02, 42).is_err());
    assert!(generate_star_toy(0.0, 42).is_err());
}

#[test]
fn materialized_fragments_partition_the_relation() {
    let ds = toy_r();
    let schema = r_schema(&PredicateSet::from_predicates("r", vec![toy_pset().predicates[0].clone()]), &["1", "0"]);
    let mat = materialize(&schema, &ds, DEFAULT_STATS_TARGET).unwrap();
    let sizes: Vec<usize> = mat.relation("r").unwrap().fragments.iter().map(|f| f.rows.len()).collect();
    assert_eq!(sizes, vec![3, 3]);

    let ds = star2(30, 20, 800, 5);
    let w = parse_workload(STAR2_WORKLOAD, &ds.schema).unwrap();
    let schema = finest(&ds.schema, &predicate_sets(&ds, &w).unwrap());
    let mat = materialize(&schema, &ds, DEFAULT_STATS_TARGET).unwrap();
    for (rel, m) in &mat.relations {
        let total: usize = m.fragments.iter().map(|f| f.rows.len()).sum();
        assert_eq!(total, ds.relation(rel).unwrap().len(), "{rel}");
    }
}

#[test]
fn executor_reads_only_participating_fragments() {
    let ds = toy_r();
    let lt6 = PredicateSet::from_predicates("r", vec![toy_pset().predicates[0].clone()]);
    let split = materialize(&r_schema(&lt6, &["1", "0"]), &ds, DEFAULT_STATS_TARGET).unwrap();
    let whole = materialize(&r_schema(&lt6, &["2"]), &ds, DEFAULT_STATS_TARGET).unwrap();

    let q = r_query("SELECT count(*) FROM r WHERE a < 6;");
    let (rs, cs) = execute_query(&q, &split).unwrap();
    let (rw, cw) = execute_query(&q, &whole).unwrap();
    assert_eq!(rs.rows.len(), 3);
    assert_eq!(sorted(rs.rows), sorted(rw.rows));
    assert_eq!((cs.tuples_read, cw.tuples_read), (3, 6));
    assert_eq!(cs.fragments_scanned, 1);

    let q = r_query("SELECT count(*) FROM r WHERE a < 1 AND a > 9;");
    let (r, c) = execute_query(&q, &split).unwrap();
    assert!(r.rows.is_empty());
    assert_eq!(c.result_rows, 0);
    assert_eq!(c.fragments_scanned, 0);
}

#[test]
fn single_fragment_validation_is_exact() {
    let ds = generate_star_toy(0.001, 3).unwrap();
    let w = ssb_workload().unwrap();
    let psets = predicate_sets(&ds, &w).unwrap();
    let stats = DatasetStats::build(&ds, &psets, DEFAULT_STATS_TARGET).unwrap();
    let problem = Problem::new(&ds.schema, &stats, &w, CostParams::default()).unwrap();
    let schema = problem.baseline_schema().unwrap();
    let report = validate_simulation(&schema, &ds, &stats, &w, &CostParams::default()).unwrap();
    assert_eq!(report.queries.len(), w.len());
    assert!(report.workload_error < 1e-9, "{}", report.workload_error);
    assert!(report.summary.max < 1e-9);
    for f in &report.fragments {
        assert_eq!(f.simulated_reltuples, f.exact_reltuples);
        assert_eq!(f.simulated_relpages, f.exact_relpages);
    }
}

/// Query answers as sets of base-row combinations, keyed by query id.
fn answers(schema: &hpart::fragmodel::PartitionSchema, ds: &Dataset, w: &[QueryShape]) -> BTreeMap<String, Vec<Vec<u32>>> {
    let mat = materialize(schema, ds, DEFAULT_STATS_TARGET).unwrap();
    w.iter()
        .map(|q| (q.id.clone(), sorted(execute_query(q, &mat).unwrap().0.rows)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Partitioning never changes query answers.
    #[test]
    fn partitioning_is_transparent(seed in 0u64..1000, customers in 5i64..30, products in 5i64..30) {
        let ds = star2(customers, products, 400, seed);
        let w = parse_workload(STAR2_WORKLOAD, &ds.schema).unwrap();
        let psets = predicate_sets(&ds, &w).unwrap();
        let stats = DatasetStats::build(&ds, &psets, DEFAULT_STATS_TARGET).unwrap();
        let problem = Problem::new(&ds.schema, &stats, &w, CostParams::default()).unwrap();
        let reference = answers(&problem.baseline_schema().unwrap(), &ds, &w);
        let mut schemas = random_schemas(&problem, 3, 16, seed).unwrap();
        schemas.push(finest(&ds.schema, &psets));
        for s in &schemas {
            prop_assert_eq!(&answers(s, &ds, &w), &reference);
        }
    }
}
