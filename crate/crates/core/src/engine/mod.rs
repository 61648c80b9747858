//! Data ingestion, the toy star generator, materialization, the executor
//! and the validation harness.

mod executor;
mod ingest;
mod materialize;
mod ssb;
mod validate;

use std::collections::BTreeMap;

pub use executor::{execute_query, execute_workload, ExecutionCounters, QueryResult};
pub use ingest::{load_csv_relation, load_dataset, read_csv_relation, write_csv_relation, write_dataset};
pub use materialize::{materialize, MaterializedFragment, MaterializedRelation, MaterializedSchema};
pub use ssb::{generate_star_toy, ssb_schema_def, ssb_sizes, ssb_workload, DIMENSION_FLOOR, FACT_ROWS_PER_SF, MAX_SF, SSB_WORKLOAD_SQL};
pub use validate::{
    random_schemas, relative_error, spearman, validate_simulation, AttributeDelta, ErrorSummary, FragmentDelta, QueryError,
    ValidationReport,
};

use crate::data::Dataset;
use crate::error::Result;
use crate::fragmodel::StarSchemaDef;
use crate::stats::TupleEncodedIndex;
use crate::workload::{collect_predicate_sets, minimize_predicates, PredicateSet, QueryShape};

/// Predicate sets of a workload, minimized on the data: predicates that are
/// empty, full, or equivalent to an earlier one are dropped. In star mode
/// the fact keeps no predicates of its own; its fragmentation is derived.
pub fn predicate_sets(dataset: &Dataset, workload: &[QueryShape]) -> Result<BTreeMap<String, PredicateSet>> {
    let star = StarSchemaDef::from_schema_def(&dataset.schema);
    let raw = collect_predicate_sets(workload, &dataset.schema)?;
    let mut out = BTreeMap::new();
    for (rel, pset) in raw {
        if star.as_ref().is_some_and(|s| s.fact == rel) {
            out.insert(rel.clone(), PredicateSet::new(rel));
            continue;
        }
        let idx = TupleEncodedIndex::build_local(dataset.relation(&rel)?, &pset)?;
        out.insert(rel, minimize_predicates(&pset, &idx.bitmaps)?);
    }
    Ok(out)
}
