mod common;

use hpart::adaptivity::{
    apply_adaptation, merge_group_cost, plan_merge_on_removal, plan_split_on_addition, refresh_statistics,
    AdaptationPlan, SplitRead,
};
use hpart::catalog::{populate_catalog, CatalogStore};
use hpart::data::{Dataset, SchemaDef};
use hpart::fragmodel::PartitionSchema;
use hpart::stats::{DatasetStats, DEFAULT_STATS_TARGET};
use hpart::workload::{parse_workload, QueryShape};
use hpart::Error;

use common::{key, r_schema, toy_pset, toy_r, R_DEF};

fn workload(sql: &str) -> Vec<QueryShape> {
    parse_workload(sql, &SchemaDef::from_toml(R_DEF).unwrap()).unwrap()
}

fn setup(schema: &PartitionSchema) -> (Dataset, DatasetStats, CatalogStore) {
    let ds = toy_r();
    let stats = DatasetStats::build(&ds, &schema.psets(), DEFAULT_STATS_TARGET).unwrap();
    let store = populate_catalog(schema, &stats).unwrap();
    (ds, stats, store)
}

const TWO: &str = "-- id: lt\nSELECT count(*) FROM r WHERE a < 6;\n-- id: ge\nSELECT count(*) FROM r WHERE a >= 4;";

#[test]
fn merge_cost_reads_and_writes_the_smaller_members() {
    assert_eq!(merge_group_cost(&[(10, 2), (30, 5), (20, 4)]), (1, 12));
    assert_eq!(merge_group_cost(&[(7, 3)]), (0, 0));
    assert_eq!(merge_group_cost(&[(5, 1), (5, 9)]), (0, 18));
}

#[test]
fn removal_merges_fragments_that_coincide() {
    let def = SchemaDef::from_toml(R_DEF).unwrap();
    let schema = r_schema(&toy_pset(), &["11", "10", "01"]);
    let (_, stats, store) = setup(&schema);
    let plan = plan_merge_on_removal(&schema, &def, &workload(TWO), "ge", &store).unwrap();
    assert_eq!(plan.removed.len(), 1);
    assert_eq!(plan.groups.len(), 1);
    let g = &plan.groups[0];
    // (1,0) holds A = 1, 3 and absorbs (1,1)
    assert_eq!(g.sources, vec![hpart::fragmodel::fragment_id("r", &key("11"))]);
    assert_eq!(g.target, hpart::fragmodel::fragment_id("r", &key("10")));
    assert_eq!(plan.cost, 2 * store.relation(&hpart::fragmodel::fragment_id("r", &key("11"))).unwrap().relpages);
    assert_eq!(plan.schema.relations["r"].fragments.len(), 2);

    let applied = apply_adaptation(&AdaptationPlan::Merge(plan.clone()), &schema, &store, &stats).unwrap();
    let merged = applied.store.relation(&g.result).unwrap();
    assert_eq!(merged.reltuples, 3);
    let total: u64 = applied.schema.fragments().map(|(_, f)| applied.store.relation(&f.id).unwrap().reltuples).sum();
    assert_eq!(total, 6);
}

#[test]
fn removal_of_a_query_without_own_predicates_is_free() {
    let def = SchemaDef::from_toml(R_DEF).unwrap();
    let schema = r_schema(&toy_pset(), &["11", "10", "01"]);
    let (_, _, store) = setup(&schema);
    let w = workload(&format!("{TWO}\n-- id: both\nSELECT count(*) FROM r WHERE a < 6 AND a >= 4;"));
    let plan = plan_merge_on_removal(&schema, &def, &w, "both", &store).unwrap();
    assert!(plan.removed.is_empty());
    assert!(plan.groups.is_empty());
    assert_eq!(plan.cost, 0);
    assert!(plan_merge_on_removal(&schema, &def, &w, "missing", &store).is_err());
}

#[test]
fn addition_splits_only_satisfiable_children() {
    let def = SchemaDef::from_toml(R_DEF).unwrap();
    let schema = r_schema(&toy_pset(), &["12", "02"]);
    let (ds, stats, store) = setup(&schema);

    let q = workload("SELECT count(*) FROM r WHERE a < 2;").remove(0);
    let plan = plan_split_on_addition(&schema, &def, &q, &ds, &stats, SplitRead::Parent).unwrap();
    assert_eq!(plan.added.len(), 1);
    // A >= 6 cannot also satisfy A < 2
    assert_eq!(plan.splits.len(), 1);
    assert_eq!(plan.splits[0].parent, hpart::fragmodel::fragment_id("r", &key("12")));
    assert_eq!(plan.splits[0].children.len(), 2);
    assert_eq!(plan.cost, plan.splits.iter().map(|s| s.cost).sum::<u64>());
    let parent_pages = store.relation(&plan.splits[0].parent).unwrap().relpages;
    assert!(plan.cost >= parent_pages);

    let applied = apply_adaptation(&AdaptationPlan::Split(plan), &schema, &store, &stats).unwrap();
    assert_eq!(applied.schema.relations["r"].fragments.len(), 3);
    let tuples: Vec<u64> = applied
        .schema
        .fragments()
        .map(|(_, f)| applied.store.relation(&f.id).unwrap().reltuples)
        .collect();
    assert_eq!(tuples.iter().sum::<u64>(), 6);
    assert!(tuples.contains(&1));

    let known = workload("SELECT count(*) FROM r WHERE a < 6;").remove(0);
    let plan = plan_split_on_addition(&schema, &def, &known, &ds, &stats, SplitRead::Parent).unwrap();
    assert!(plan.splits.is_empty());
    assert_eq!(plan.cost, 0);
}

#[test]
fn split_may_leave_an_empty_child() {
    let def = SchemaDef::from_toml(R_DEF).unwrap();
    let schema = r_schema(&toy_pset(), &["12", "02"]);
    let (ds, stats, store) = setup(&schema);
    // t = 'e' only holds for A = 9, so it leaves A < 6 untouched
    let q = workload("SELECT count(*) FROM r WHERE t = 'e';").remove(0);
    let plan = plan_split_on_addition(&schema, &def, &q, &ds, &stats, SplitRead::Parent).unwrap();
    assert_eq!(plan.splits.len(), 2);
    let first = &plan.splits[0];
    assert_eq!(first.parent, hpart::fragmodel::fragment_id("r", &key("12")));
    // nothing to write: the cost is the parent read alone
    assert_eq!(first.cost, store.relation(&first.parent).unwrap().relpages);
    let applied = apply_adaptation(&AdaptationPlan::Split(plan), &schema, &store, &stats).unwrap();
    let tuples: Vec<u64> = applied
        .schema
        .fragments()
        .map(|(_, f)| applied.store.relation(&f.id).unwrap().reltuples)
        .collect();
    assert_eq!(tuples.iter().filter(|t| **t == 0).count(), 1, "{tuples:?}");
    assert_eq!(tuples.iter().sum::<u64>(), 6);
}

#[test]
fn stale_plans_are_rejected() {
    let def = SchemaDef::from_toml(R_DEF).unwrap();
    let schema = r_schema(&toy_pset(), &["11", "10", "01"]);
    let (_, stats, store) = setup(&schema);
    let plan = plan_merge_on_removal(&schema, &def, &workload(TWO), "ge", &store).unwrap();
    let other = r_schema(&toy_pset(), &["12", "02"]);
    match apply_adaptation(&AdaptationPlan::Merge(plan), &other, &store, &stats) {
        Err(Error::Stale(_)) => {}
        other => panic!("expected a stale plan error, got {:?}", other.map(|r| r.schema)),
    }
}

#[test]
fn refresh_tracks_new_data() {
    let schema = r_schema(&toy_pset(), &["10", "11", "01"]);
    let (ds, stats, _) = setup(&schema);
    let again = refresh_statistics(&ds, &stats).unwrap();
    assert_eq!(again.epoch, stats.epoch + 1);
    for k in ["10", "11", "01", "22"] {
        let (a, b) = (stats.relation("r").unwrap(), again.relation("r").unwrap());
        assert_eq!(a.derive(&key(k), None).unwrap(), b.derive(&key(k), None).unwrap());
    }

    let mut doubled = toy_r();
    let data = doubled.relation("r").unwrap();
    let rows: Vec<_> = (0..data.len()).map(|i| data.row(i)).collect();
    let r = doubled.relations.get_mut("r").unwrap();
    for row in rows {
        r.push_row(row).unwrap();
    }
    let fresh = refresh_statistics(&doubled, &stats).unwrap();
    for k in ["10", "11", "01", "22"] {
        let old = stats.relation("r").unwrap().derive(&key(k), None).unwrap();
        let new = fresh.relation("r").unwrap().derive(&key(k), None).unwrap();
        assert_eq!(new.reltuples, 2 * old.reltuples);
        for (o, n) in old.attributes.iter().zip(&new.attributes) {
            assert_eq!(o.as_ref().unwrap().distinct, n.as_ref().unwrap().distinct);
        }
    }
    let stale = populate_catalog(&schema, &stats).unwrap();
    assert!(stale.ensure_current(&fresh).is_err());
}
