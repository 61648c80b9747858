#![allow(dead_code)]

use std::collections::BTreeMap;

use hpart::data::{Dataset, SchemaDef};
use hpart::fragmodel::{satisfiable_cells, FragmentKey, PartitionSchema};
use hpart::value::Value;
use hpart::workload::{AtomicPredicate, CmpOp, PredicateSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const R_DEF: &str = r#"
[[relation]]
name = "r"
[[relation.attribute]]
name = "a"
kind = "integer"
[[relation.attribute]]
name = "t"
kind = "text"
"#;

/// The six-tuple relation R with A = 1, 3, ..., 11.
pub fn toy_r() -> Dataset {
    let mut ds = Dataset::new(SchemaDef::from_toml(R_DEF).unwrap());
    let r = ds.relations.get_mut("r").unwrap();
    for (a, t) in [(1, "aa"), (3, "bbbb"), (5, "c"), (7, "dd"), (9, "e"), (11, "ff")] {
        r.push_row(vec![Value::Integer(a), Value::Text(t.into())]).unwrap();
    }
    ds
}

pub fn atom(rel: &str, attr: &str, op: CmpOp, v: i64) -> AtomicPredicate {
    AtomicPredicate::new(rel, attr, op, Value::Integer(v))
}

/// φ1: A < 6, φ2: A ≥ 4.
pub fn toy_pset() -> PredicateSet {
    PredicateSet::from_predicates("r", vec![atom("r", "a", CmpOp::Lt, 6), atom("r", "a", CmpOp::Ge, 4)])
}

pub fn key(s: &str) -> FragmentKey {
    s.parse().unwrap()
}

pub fn keys(list: &[&str]) -> Vec<FragmentKey> {
    list.iter().map(|s| key(s)).collect()
}

/// Schema over R with the given keys and predicates.
pub fn r_schema(pset: &PredicateSet, list: &[&str]) -> PartitionSchema {
    let def = SchemaDef::from_toml(R_DEF).unwrap();
    let assign = BTreeMap::from([("r".to_string(), (pset.clone(), keys(list)))]);
    PartitionSchema::new(&def, assign).unwrap()
}

pub const STAR2_DEF: &str = r#"
[[relation]]
name = "sales"
role = "fact"
[[relation.attribute]]
name = "s_cust"
kind = "integer"
[[relation.attribute]]
name = "s_prod"
kind = "integer"
[[relation.attribute]]
name = "s_amount"
kind = "integer"

[[relation]]
name = "cust"
role = "dimension"
primary_key = ["c_id"]
[[relation.attribute]]
name = "c_id"
kind = "integer"
[[relation.attribute]]
name = "c_region"
kind = "text"
[[relation.attribute]]
name = "c_segment"
kind = "text"

[[relation]]
name = "prod"
role = "dimension"
primary_key = ["p_id"]
[[relation.attribute]]
name = "p_id"
kind = "integer"
[[relation.attribute]]
name = "p_cat"
kind = "text"
[[relation.attribute]]
name = "p_price"
kind = "integer"

[[foreign_key]]
fact_attribute = "s_cust"
dimension = "cust"
dimension_key = "c_id"

[[foreign_key]]
fact_attribute = "s_prod"
dimension = "prod"
dimension_key = "p_id"
"#;

pub const STAR2_WORKLOAD: &str = "
-- id: east
SELECT sum(s_amount) FROM sales, cust WHERE s_cust = c_id AND c_region = 'EAST';
-- id: tools
SELECT sum(s_amount) FROM sales, prod WHERE s_prod = p_id AND p_cat = 'TOOLS' AND p_price < 50;
-- id: retail_food
SELECT sum(s_amount) FROM sales, cust, prod
WHERE s_cust = c_id AND s_prod = p_id AND c_segment = 'RETAIL' AND p_cat = 'FOOD';
";

/// A two-dimension star: customers by region and segment, products by
/// category and price, and uniformly drawn sales.
pub fn star2(customers: i64, products: i64, sales: usize, seed: u64) -> Dataset {
    let mut ds = Dataset::new(SchemaDef::from_toml(STAR2_DEF).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| Value::Text(xs[rng.gen_range(0..xs.len())].to_string());
    let rel = ds.relations.get_mut("cust").unwrap();
    for id in 0..customers {
        let row = vec![
            Value::Integer(id),
            pick(&mut rng, &["EAST", "WEST", "NORTH"]),
            pick(&mut rng, &["RETAIL", "WHOLESALE"]),
        ];
        rel.push_row(row).unwrap();
    }
    let rel = ds.relations.get_mut("prod").unwrap();
    for id in 0..products {
        let row = vec![
            Value::Integer(id),
            pick(&mut rng, &["TOOLS", "FOOD", "TOYS"]),
            Value::Integer(rng.gen_range(1..100)),
        ];
        rel.push_row(row).unwrap();
    }
    let rel = ds.relations.get_mut("sales").unwrap();
    for _ in 0..sales {
        let row = vec![
            Value::Integer(rng.gen_range(0..customers)),
            Value::Integer(rng.gen_range(0..products)),
            Value::Integer(rng.gen_range(1..1000)),
        ];
        rel.push_row(row).unwrap();
    }
    ds
}

/// Every satisfiable cell of each non-fact relation's predicate set as its
/// own fragment.
pub fn finest(def: &SchemaDef, psets: &BTreeMap<String, PredicateSet>) -> PartitionSchema {
    let fact = def.fact().map(|f| f.name.clone());
    let assign = psets
        .iter()
        .filter(|(rel, _)| Some(*rel) != fact.as_ref())
        .map(|(rel, pset)| {
            let keys = satisfiable_cells(pset).unwrap().iter().map(FragmentKey::from_cell).collect();
            (rel.clone(), (pset.clone(), keys))
        })
        .collect();
    PartitionSchema::new(def, assign).unwrap()
}
