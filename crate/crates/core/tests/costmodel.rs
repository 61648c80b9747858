mod common;

use std::collections::BTreeMap;

use hpart::catalog::{populate_catalog, AttributeCatalogRecord, CatalogStore, RelationCatalogRecord};
use hpart::costmodel::{
    atom_selectivity, estimate_selectivity, join_cost, participating_tuples, query_cost, scan_cost_with,
    workload_cost, CostParams, PlanCost,
};
use hpart::data::SchemaDef;
use hpart::fragmodel::PartitionSchema;
use hpart::stats::{DatasetStats, DEFAULT_STATS_TARGET};
use hpart::value::Value;
use hpart::workload::{parse_workload, AtomicPredicate, CmpOp, PredicateExpr, PredicateSet, QueryShape};

use common::{atom, keys, r_schema, star2, toy_pset, toy_r, R_DEF, STAR2_DEF};

fn record(mcv: &[(i64, f64)], histogram: Option<&[i64]>) -> AttributeCatalogRecord {
    AttributeCatalogRecord {
        fragment: "r".into(),
        attribute: "a".into(),
        stadistinct: -1.0,
        width: 4.0,
        mcv_values: mcv.iter().map(|(v, _)| Value::Integer(*v)).collect(),
        mcv_freqs: mcv.iter().map(|(_, f)| *f).collect(),
        histogram: histogram.map(|h| h.iter().map(|&v| Value::Integer(v)).collect()),
    }
}

fn r_query(sql: &str) -> QueryShape {
    parse_workload(sql, &SchemaDef::from_toml(R_DEF).unwrap()).unwrap().remove(0)
}

fn costed(schema: &PartitionSchema) -> CatalogStore {
    let stats = DatasetStats::build(&toy_r(), &schema.psets(), DEFAULT_STATS_TARGET).unwrap();
    populate_catalog(schema, &stats).unwrap()
}

#[test]
fn selectivity_examples() {
    let mcv = record(&[(7, 0.25), (1, 0.25)], None);
    assert_eq!(atom_selectivity(&atom("r", "a", CmpOp::Eq, 7), Some(&mcv), 4.0), 0.25);

    let hist = record(&[], Some(&[0, 10, 20, 30]));
    let s = atom_selectivity(&atom("r", "a", CmpOp::Lt, 15), Some(&hist), 100.0);
    assert!((s - 0.5).abs() < 1e-9, "{s}");

    assert_eq!(estimate_selectivity(&PredicateExpr::True, &|_| None, 10.0), 1.0);
    let not = PredicateExpr::Not(Box::new(PredicateExpr::Atom(atom("r", "a", CmpOp::Eq, 7))));
    let s = estimate_selectivity(&not, &|_| Some(&mcv), 4.0);
    assert!((s - 0.75).abs() < 1e-12);
}

#[test]
fn scan_and_join_costs() {
    let p = CostParams::default();
    let rec = RelationCatalogRecord {
        fragment: "r".into(),
        relation: "r".into(),
        reltuples: 1000,
        relpages: 14,
    };
    // 14 pages + 1000 tuples + 2000 operator evaluations
    let s = scan_cost_with(&rec, 2, 0.1, &p);
    assert!((s.total - 29.0).abs() < 1e-9);
    assert!((s.rows - 100.0).abs() < 1e-9);
    let j = join_cost(s, PlanCost { total: 5.0, rows: 10.0 }, 0.1, &p);
    assert!((j.total - 36.025).abs() < 1e-9, "{}", j.total);
    assert!((j.rows - 100.0).abs() < 1e-9);
}

#[test]
fn pruning_skips_excluded_fragments() {
    let schema = r_schema(&toy_pset(), &["10", "11", "01"]);
    let store = costed(&schema);
    let p = CostParams::default();
    let c = query_cost(&r_query("SELECT count(*) FROM r WHERE a = 9;"), &schema, &store, &p).unwrap();
    assert_eq!(c.fragments, 1);
    let all = query_cost(&r_query("SELECT count(*) FROM r;"), &schema, &store, &p).unwrap();
    assert_eq!(all.fragments, 3);
    assert!(c.total < all.total);
    let none = query_cost(&r_query("SELECT count(*) FROM r WHERE a < 1 AND a > 9;"), &schema, &store, &p).unwrap();
    assert!(none.fragments <= 3);
}

#[test]
fn star_enumerates_participating_sub_stars() {
    let def = SchemaDef::from_toml(STAR2_DEF).unwrap();
    let eq = |rel: &str, attr: &str, v: &str| AtomicPredicate::new(rel, attr, CmpOp::Eq, Value::Text(v.into()));
    let assign = BTreeMap::from([
        (
            "cust".to_string(),
            (PredicateSet::from_predicates("cust", vec![eq("cust", "c_region", "EAST")]), keys(&["1", "0"])),
        ),
        (
            "prod".to_string(),
            (PredicateSet::from_predicates("prod", vec![eq("prod", "p_cat", "FOOD")]), keys(&["1", "0"])),
        ),
    ]);
    let schema = PartitionSchema::new(&def, assign).unwrap();
    let w = parse_workload(
        "SELECT sum(s_amount) FROM sales, cust WHERE s_cust = c_id AND c_region = 'EAST';
         SELECT sum(s_amount) FROM sales, cust, prod WHERE s_cust = c_id AND s_prod = p_id AND p_cat = 'FOOD';",
        &def,
    )
    .unwrap();
    // the region fixes the customer fragment; products stay free
    let t = participating_tuples(&w[0], &schema).unwrap();
    assert_eq!(t.len(), 2);
    assert!(t.iter().all(|tuple| tuple[1] == 0));
    let t = participating_tuples(&w[1], &schema).unwrap();
    assert_eq!(t.len(), 2);
    assert!(t.iter().all(|tuple| tuple[2] == 0));

    let ds = star2(40, 30, 1500, 11);
    let stats = DatasetStats::build(&ds, &schema.psets(), DEFAULT_STATS_TARGET).unwrap();
    let store = populate_catalog(&schema, &stats).unwrap();
    let c = query_cost(&w[0], &schema, &store, &CostParams::default()).unwrap();
    assert_eq!(c.fragments, 3);
}

#[test]
fn workload_cost_is_additive() {
    let schema = r_schema(&toy_pset(), &["10", "11", "01"]);
    let store = costed(&schema);
    let p = CostParams::default();
    let q = r_query("SELECT count(*) FROM r WHERE a >= 4;");
    let one = workload_cost(&schema, std::slice::from_ref(&q), &store, &p).unwrap();
    let two = workload_cost(&schema, &[q.clone(), q.clone()], &store, &p).unwrap();
    assert!((two - 2.0 * one).abs() < 1e-9);
    assert!((one - query_cost(&q, &schema, &store, &p).unwrap().total).abs() < 1e-12);
}

#[test]
fn all_two_key_costs_like_the_unpartitioned_relation() {
    let p = CostParams::default();
    let q = r_query("SELECT count(*) FROM r WHERE a < 6 AND a >= 4;");
    let coarse = r_schema(&toy_pset(), &["22"]);
    let plain = r_schema(&PredicateSet::new("r"), &[""]);
    let a = query_cost(&q, &coarse, &costed(&coarse), &p).unwrap();
    let b = query_cost(&q, &plain, &costed(&plain), &p).unwrap();
    assert!((a.total - b.total).abs() < 1e-9);
    assert!((a.rows - b.rows).abs() < 1e-9);
}
