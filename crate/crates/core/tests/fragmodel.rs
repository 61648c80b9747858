mod common;

use std::collections::BTreeMap;

use hpart::data::SchemaDef;
use hpart::fragmodel::{
    build_global_index, derive_fact_keys, key_covers, key_satisfiable, satisfiable, satisfiable_cells, validate_schema,
    Cell, FragmentKey, PartitionSchema, StarSchemaDef,
};
use hpart::value::Value;
use hpart::workload::{AtomicPredicate, CmpOp, PredicateSet};
use hpart::Error;
use proptest::prelude::*;

use common::{atom, key, keys, toy_pset, STAR2_DEF};

fn cell(s: &str) -> Cell {
    Cell::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
}

fn text(rel: &str, attr: &str, v: &str) -> AtomicPredicate {
    AtomicPredicate::new(rel, attr, CmpOp::Eq, Value::Text(v.into()))
}

#[test]
fn covering_examples() {
    assert!(key_covers(&key("21"), &cell("01")).unwrap());
    assert!(!key_covers(&key("21"), &cell("10")).unwrap());
    assert!(key_covers(&key("11"), &cell("11")).unwrap());
    assert!(key_covers(&key("1"), &cell("10")).is_err());
}

#[test]
fn satisfiability_examples() {
    assert!(key_satisfiable(&key("11"), &toy_pset()).unwrap());
    let p = PredicateSet::from_predicates("r", vec![atom("r", "a", CmpOp::Lt, 4), atom("r", "a", CmpOp::Ge, 6)]);
    assert!(!key_satisfiable(&key("11"), &p).unwrap());
    let (a, b) = (text("r", "c", "A"), text("r", "c", "B"));
    assert!(!satisfiable(&[(&a, true), (&b, true)]));
    assert!(satisfiable(&[(&a, true), (&b, false)]));
}

#[test]
fn validation_examples() {
    let p1 = PredicateSet::from_predicates("r", vec![atom("r", "a", CmpOp::Lt, 6)]);
    let t = validate_schema("r", &keys(&["1", "0"]), &p1).unwrap();
    assert_eq!(t.len(), 2);
    assert_ne!(t.lookup(&cell("1")), t.lookup(&cell("0")));

    let t = validate_schema("r", &keys(&["2"]), &p1).unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t.lookup(&cell("1")), t.lookup(&cell("0")));

    let p2 = PredicateSet::from_predicates("r", vec![atom("r", "a", CmpOp::Lt, 6), atom("r", "a", CmpOp::Lt, 9)]);
    match validate_schema("r", &keys(&["12", "11"]), &p2) {
        Err(Error::Overlap { cell, .. }) => assert_eq!(cell, "11"),
        other => panic!("expected an overlap, got {other:?}"),
    }
}

#[test]
fn unsatisfiable_cells_are_not_indexed() {
    // A < 6 and A >= 4: the cell (0,0) means A >= 6 and A < 4
    let t = validate_schema("r", &keys(&["12", "01"]), &toy_pset()).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t.lookup(&cell("00")), None);
}

fn star_schema(cust: (&[&str], &[&str]), prod: (&[&str], &[&str])) -> PartitionSchema {
    let def = SchemaDef::from_toml(STAR2_DEF).unwrap();
    let mk = |rel: &str, attr: &str, values: &[&str]| {
        PredicateSet::from_predicates(rel, values.iter().map(|v| text(rel, attr, v)).collect())
    };
    let assign = BTreeMap::from([
        ("cust".to_string(), (mk("cust", "c_region", cust.0), keys(cust.1))),
        ("prod".to_string(), (mk("prod", "p_cat", prod.0), keys(prod.1))),
    ]);
    PartitionSchema::new(&def, assign).unwrap()
}

#[test]
fn fact_keys_are_the_cross_product() {
    let schema = star_schema((&["EAST"], &["1", "0"]), (&["FOOD"], &["1", "0"]));
    let star = schema.star.clone().unwrap();
    let dims = [("cust", &schema.relations["cust"]), ("prod", &schema.relations["prod"])];
    let fact = derive_fact_keys(&dims, &star).unwrap();
    assert_eq!(fact, keys(&["11", "10", "01", "00"]));
    assert_eq!(schema.relations["sales"].keys(), fact);
    assert_eq!(schema.fact_components(1), vec![0, 1]);
    assert_eq!(schema.fact_fragment_index(&[1, 0]), 2);

    let one = star_schema((&["EAST"], &["1", "0"]), (&[], &[""]));
    assert_eq!(one.relations["sales"].fragments.len(), 2);
}

#[test]
fn derive_rejects_non_dimensions() {
    let schema = star_schema((&["EAST"], &["1", "0"]), (&["FOOD"], &["2"]));
    let star = schema.star.clone().unwrap();
    assert!(derive_fact_keys(&[("sales", &schema.relations["sales"])], &star).is_err());
}

#[test]
fn global_index_entries() {
    let full = star_schema((&["EAST"], &["1", "0"]), (&["FOOD"], &["1", "0"]));
    let t = build_global_index(&full).unwrap();
    assert_eq!(t.len(), 4);
    let ids: std::collections::BTreeSet<_> = t.entries.values().collect();
    assert_eq!(ids.len(), 4);

    // the merged product key sends both of its cells to one fragment
    let merged = star_schema((&["EAST"], &["1", "0"]), (&["FOOD"], &["2"]));
    let t = build_global_index(&merged).unwrap();
    assert_eq!(t.len(), 4);
    assert_eq!(t.lookup(&cell("11")), t.lookup(&cell("10")));
    assert_ne!(t.lookup(&cell("11")), t.lookup(&cell("01")));

    // region = EAST and region = WEST cannot both hold
    let excl = star_schema((&["EAST", "WEST"], &["10", "01", "00"]), (&["FOOD"], &["1", "0"]));
    let t = build_global_index(&excl).unwrap();
    assert_eq!(t.len(), 6);
    assert_eq!(t.lookup(&cell("111")), None);
}

#[test]
fn schema_text_round_trip() {
    let def = SchemaDef::from_toml(STAR2_DEF).unwrap();
    let schema = star_schema((&["EAST", "WEST"], &["10", "01", "00"]), (&["FOOD"], &["2"]));
    let again = PartitionSchema::from_toml(&schema.to_toml(), &def).unwrap();
    assert_eq!(again, schema);
}

#[test]
fn fact_assignments_are_rejected() {
    let def = SchemaDef::from_toml(STAR2_DEF).unwrap();
    let assign = BTreeMap::from([("sales".to_string(), (PredicateSet::new("sales"), keys(&[""])))]);
    assert!(PartitionSchema::new(&def, assign).is_err());
    let _ = StarSchemaDef::from_schema_def(&def).unwrap();
}

/// Valid iff keys are distinct and each satisfiable cell has one owner.
fn brute_force(keys: &[FragmentKey], cells: &[Cell]) -> Result<(), ()> {
    if (1..keys.len()).any(|i| keys[..i].contains(&keys[i])) {
        return Err(());
    }
    for c in cells {
        let owners = keys.iter().filter(|k| k.covers_unchecked(c)).count();
        if owners != 1 {
            return Err(());
        }
    }
    Ok(())
}

proptest! {
    /// Validation accepts exactly the key sets that give every satisfiable
    /// cell one owner, and the index table points each cell to it.
    #[test]
    fn validation_matches_brute_force(
        bounds in prop::collection::vec(0i64..10, 1..4),
        raw in prop::collection::vec(prop::collection::vec(0u8..3, 3), 1..6),
    ) {
        let pset = PredicateSet::from_predicates(
            "r",
            bounds.iter().map(|&b| atom("r", "a", CmpOp::Lt, b)).collect(),
        );
        let m = pset.m();
        let ks: Vec<FragmentKey> = raw.iter().map(|d| FragmentKey::new(d[..m].to_vec()).unwrap()).collect();
        let cells = satisfiable_cells(&pset).unwrap();
        let expected = brute_force(&ks, &cells);
        match validate_schema("r", &ks, &pset) {
            Ok(t) => {
                prop_assert!(expected.is_ok());
                prop_assert_eq!(t.len(), cells.len());
                for c in &cells {
                    let i = t.lookup(c).unwrap();
                    prop_assert!(ks[i].covers_unchecked(c));
                }
            }
            Err(_) => prop_assert!(expected.is_err()),
        }
    }
}
