mod common;

use hpart::engine::{ssb_schema_def, ssb_workload};
use hpart::stats::TupleEncodedIndex;
use hpart::value::Value;
use hpart::workload::{
    atomize, collect_predicate_sets, minimize_predicates, parse_workload, CmpOp, PredicateExpr, PredicateSet,
};
use proptest::prelude::*;

use common::{atom, toy_r};

#[test]
fn single_comparison_gives_one_atomic() {
    let q = parse_workload(
        "SELECT sum(lo_revenue) FROM lineorder WHERE lo_quantity < 25;",
        &ssb_schema_def(),
    )
    .unwrap();
    assert_eq!(q.len(), 1);
    let atoms = atomize(q[0].filter("lineorder")).unwrap().atoms();
    assert_eq!(atoms, vec![atom("lineorder", "lo_quantity", CmpOp::Lt, 25)]);
}

#[test]
fn bundled_workload_has_thirteen_queries() {
    let w = ssb_workload().unwrap();
    let ids: Vec<&str> = w.iter().map(|q| q.id.as_str()).collect();
    assert_eq!(
        ids,
        ["Q1.1", "Q1.2", "Q1.3", "Q2.1", "Q2.2", "Q2.3", "Q3.1", "Q3.2", "Q3.3", "Q3.4", "Q4.1", "Q4.2", "Q4.3"]
    );
    for q in &w {
        assert_eq!(q.relations[0], "lineorder", "{} joins from the fact", q.id);
        assert_eq!(q.joins.len(), q.relations.len() - 1);
    }
}

#[test]
fn between_keeps_its_leaf_until_atomized() {
    let q = parse_workload(
        "SELECT count(*) FROM lineorder WHERE lo_discount BETWEEN 1 AND 3;",
        &ssb_schema_def(),
    )
    .unwrap();
    let f = q[0].filter("lineorder");
    assert!(matches!(f, PredicateExpr::Between { .. }));
    let a = atomize(f).unwrap();
    assert!(a.is_atomized());
    assert_eq!(
        a.atoms(),
        vec![
            atom("lineorder", "lo_discount", CmpOp::Ge, 1),
            atom("lineorder", "lo_discount", CmpOp::Le, 3)
        ]
    );
}

#[test]
fn in_list_is_a_disjunction_of_equalities() {
    let q = parse_workload(
        "SELECT count(*) FROM customer WHERE c_region IN ('ASIA', 'EUROPE', 'AFRICA');",
        &ssb_schema_def(),
    )
    .unwrap();
    match atomize(q[0].filter("customer")).unwrap() {
        PredicateExpr::Or(parts) => {
            assert_eq!(parts.len(), 3);
            assert!(parts
                .iter()
                .all(|p| matches!(p, PredicateExpr::Atom(a) if a.op == CmpOp::Eq)));
        }
        other => panic!("expected a disjunction, got {other:?}"),
    }
}

#[test]
fn atomic_leaf_is_unchanged() {
    let leaf = PredicateExpr::Atom(atom("lineorder", "lo_quantity", CmpOp::Lt, 25));
    assert_eq!(atomize(&leaf).unwrap(), leaf);
}

#[test]
fn predicate_sets_deduplicate_and_union() {
    let def = ssb_schema_def();
    let w = parse_workload(
        "-- id: a
SELECT count(*) FROM dwdate WHERE d_year = 1993;
-- id: b
SELECT count(*) FROM dwdate WHERE d_year = 1993;
-- id: c
SELECT count(*) FROM lineorder WHERE lo_quantity < 25;
-- id: d
SELECT count(*) FROM lineorder WHERE lo_quantity BETWEEN 1 AND 3;",
        &def,
    )
    .unwrap();
    let sets = collect_predicate_sets(&w, &def).unwrap();
    assert_eq!(sets["dwdate"].m(), 1);
    assert_eq!(sets["lineorder"].m(), 3);
    assert!(sets["customer"].is_empty());
}

#[test]
fn no_where_clause_means_empty_sets() {
    let def = ssb_schema_def();
    let w = parse_workload("SELECT count(*) FROM lineorder, dwdate WHERE lo_orderdate = d_datekey;", &def).unwrap();
    let sets = collect_predicate_sets(&w, &def).unwrap();
    assert!(sets.values().all(PredicateSet::is_empty));
}

#[test]
fn minimization_examples_on_toy_r() {
    let ds = toy_r();
    let data = ds.relation("r").unwrap();
    let mut pset = PredicateSet::new("r");
    pset.predicates = vec![
        atom("r", "a", CmpOp::Lt, 6),
        atom("r", "a", CmpOp::Lt, 6),
        atom("r", "a", CmpOp::Ge, 0),
        atom("r", "a", CmpOp::Ge, 6),
        atom("r", "a", CmpOp::Ge, 4),
    ];
    let idx = TupleEncodedIndex::build_local(data, &pset).unwrap();
    let min = minimize_predicates(&pset, &idx.bitmaps).unwrap();
    // duplicate, full and complement are gone
    assert_eq!(
        min.predicates,
        vec![atom("r", "a", CmpOp::Lt, 6), atom("r", "a", CmpOp::Ge, 4)]
    );
}

#[test]
fn parse_errors_name_their_position() {
    let err = parse_workload("SELECT x FROM lineorder WHERE lo_quantity <", &ssb_schema_def()).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
    let err = parse_workload("SELECT x FROM nowhere WHERE a = 1;", &ssb_schema_def()).unwrap_err();
    assert!(err.to_string().contains("nowhere"), "{err}");
}

#[test]
fn sql_round_trip_of_the_bundled_workload() {
    let def = ssb_schema_def();
    for q in ssb_workload().unwrap() {
        let again = parse_workload(&q.to_sql(), &def).unwrap();
        assert_eq!(again[0].relations, q.relations);
        assert_eq!(again[0].filters, q.filters, "{}", q.id);
    }
}

proptest! {
    #[test]
    fn between_and_its_atomics_agree(lo in -50i64..50, width in 0i64..40, x in -100i64..100) {
        let hi = lo + width;
        let expr = PredicateExpr::Between {
            relation: "r".into(),
            attribute: "a".into(),
            low: Value::Integer(lo),
            high: Value::Integer(hi),
        };
        let v = Value::Integer(x);
        let lookup = |_: &str, _: &str| -> &Value { &v };
        let atomized = atomize(&expr).unwrap();
        prop_assert_eq!(atomized.atoms().len(), 2);
        prop_assert_eq!(expr.eval(&lookup), atomized.eval(&lookup));
    }

    #[test]
    fn in_lists_expand_to_one_atomic_per_value(values in prop::collection::vec(-20i64..20, 1..8), x in -20i64..20) {
        let expr = PredicateExpr::In {
            relation: "r".into(),
            attribute: "a".into(),
            values: values.iter().map(|&v| Value::Integer(v)).collect(),
        };
        let v = Value::Integer(x);
        let lookup = |_: &str, _: &str| -> &Value { &v };
        let atomized = atomize(&expr).unwrap();
        prop_assert_eq!(atomized.atoms().len(), values.len());
        prop_assert_eq!(atomized.eval(&lookup), values.contains(&x));
    }
}
