//! Fragmentation algebra: ternary keys over ordered predicate sets, schema
//! validation through index tables, and derived fact fragmentation.

mod key;
mod sat;
mod schema;

pub use key::{key_covers, Cell, FragmentKey, MAX_PREDICATES};
pub use sat::{key_conjunction, key_satisfiable, satisfiable, satisfiable_cells, Conjunction};
pub use schema::{
    build_global_index, derive_fact_keys, fragment_id, validate_over_cells, validate_schema,
    Fragment, IndexTable, PartitionSchema, RelationScheme, StarSchemaDef,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;
    use crate::workload::{AtomicPredicate, CmpOp, PredicateSet};

    fn pset(n: usize) -> PredicateSet {
        PredicateSet::from_predicates(
            "r",
            (0..n)
                .map(|i| AtomicPredicate::new("r", format!("a{i}"), CmpOp::Lt, Value::Integer(5)))
                .collect(),
        )
    }

    fn keys(s: &[&str]) -> Vec<FragmentKey> {
        s.iter().map(|k| k.parse().unwrap()).collect()
    }

    #[test]
    fn validation_cases() {
        let t = validate_schema("r", &keys(&["1", "0"]), &pset(1)).unwrap();
        assert_eq!(t.len(), 2);
        let t = validate_schema("r", &keys(&["2"]), &pset(1)).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup(&Cell::new(0, 1)), t.lookup(&Cell::new(1, 1)));
        match validate_schema("r", &keys(&["12", "11"]), &pset(2)) {
            Err(crate::Error::Overlap { cell, .. }) => assert_eq!(cell, "11"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            validate_schema("r", &keys(&["1"]), &pset(1)),
            Err(crate::Error::Coverage { .. })
        ));
    }

    #[test]
    fn unsatisfiable_cells_need_no_owner() {
        let p = PredicateSet::from_predicates(
            "r",
            vec![
                AtomicPredicate::new("r", "a", CmpOp::Lt, Value::Integer(6)),
                AtomicPredicate::new("r", "a", CmpOp::Ge, Value::Integer(4)),
            ],
        );
        let t = validate_schema("r", &keys(&["12", "01"]), &p).unwrap();
        assert_eq!(t.len(), 3);
    }
}
