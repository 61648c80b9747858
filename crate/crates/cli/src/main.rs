//! `hpart`: command-line front end of the partitioning advisor.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hpart::adaptivity::{apply_adaptation, plan_merge_on_removal, plan_split_on_addition, AdaptationPlan, SplitRead};
use hpart::catalog::{export_catalog_script, populate_catalog};
use hpart::costmodel::CostParams;
use hpart::data::{Dataset, SchemaDef};
use hpart::engine::{
    generate_star_toy, load_dataset, predicate_sets, ssb_workload, validate_simulation, write_dataset, SSB_WORKLOAD_SQL,
};
use hpart::fragmodel::PartitionSchema;
use hpart::optimizer::{evolve, GaParams, Problem};
use hpart::stats::{DatasetStats, DEFAULT_STATS_TARGET};
use hpart::workload::{load_workload, parse_workload, PredicateSet, QueryShape};

#[derive(Parser)]
#[command(name = "hpart", version, about = "What-if horizontal partitioning advisor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Inputs {
    /// Schema-def file; defaults to schema.toml inside the data directory.
    #[arg(long)]
    schema_def: Option<PathBuf>,
    /// Directory with one `<relation>.csv` per relation.
    #[arg(long)]
    data_dir: PathBuf,
    /// SQL workload; defaults to the bundled star-benchmark queries.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Directory for reports and artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Search {
    #[arg(long, default_value_t = 20)]
    pop: usize,
    #[arg(long, default_value_t = 30)]
    generations: usize,
    #[arg(long, default_value_t = 0.1)]
    mutation: f64,
    #[arg(long, default_value_t = 2)]
    elitism: usize,
    #[arg(long, default_value_t = 64)]
    max_fragments: usize,
    /// Tuple relocation budget; requires --current.
    #[arg(long)]
    max_relocation: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadMode {
    Parent,
    Smaller,
}

#[derive(Subcommand)]
enum Command {
    /// Load and check CSV data against the schema-def.
    Ingest {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Build statistics artifacts and write a snapshot.
    Stats {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Search for a partitioning schema with the genetic algorithm.
    Optimize {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        search: Search,
        /// Schema currently in place (re-partitioning mode).
        #[arg(long)]
        current: Option<PathBuf>,
    },
    /// Compare simulated statistics and costs with materialized ones.
    Validate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Plan and apply the merges or splits a workload change implies.
    Adapt {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        schema: PathBuf,
        /// Id of the query leaving the workload.
        #[arg(long, conflicts_with = "add_query", required_unless_present = "add_query")]
        remove_query: Option<String>,
        /// SQL file with the query joining the workload.
        #[arg(long)]
        add_query: Option<PathBuf>,
        /// Pages a split reads.
        #[arg(long, value_enum, default_value = "parent")]
        split_read: ReadMode,
    },
    /// Write the simulated catalog of a schema as a SQL script.
    ExportCatalog {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Generate the toy star dataset and its workload.
    GenData {
        #[arg(long, default_value_t = 0.002)]
        sf: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

/// Tags a stage's failure with the stage name.
fn stage<T, E>(name: &str, r: std::result::Result<T, E>) -> Result<T>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.with_context(|| format!("stage {name}"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn jsonl(values: &[serde_json::Value]) -> String {
    values.iter().map(|v| v.to_string() + "\n").collect()
}

struct Loaded {
    data: Dataset,
    workload: Vec<QueryShape>,
}

fn load(inputs: &Inputs) -> Result<Loaded> {
    let def_path = inputs.schema_def.clone().unwrap_or_else(|| inputs.data_dir.join("schema.toml"));
    let def = stage("ingest", SchemaDef::load(&def_path))?;
    let data = stage("ingest", load_dataset(&inputs.data_dir, &def))?;
    let workload = match &inputs.workload {
        Some(p) => stage("workload", load_workload(p, &data.schema))?,
        None => stage("workload", ssb_workload())?,
    };
    Ok(Loaded { data, workload })
}

fn build_stats(data: &Dataset, psets: &BTreeMap<String, PredicateSet>) -> Result<DatasetStats> {
    stage("stats", DatasetStats::build(data, psets, DEFAULT_STATS_TARGET))
}

fn load_schema(path: &Path, def: &SchemaDef) -> Result<PartitionSchema> {
    stage("schema", PartitionSchema::load(path, def))
}

fn ingest(inputs: &Inputs) -> Result<()> {
    let l = load(inputs)?;
    let lines: Vec<_> = l
        .data
        .relations
        .values()
        .map(|r| json!({"relation": r.name(), "rows": r.len(), "attributes": r.def.attributes.len()}))
        .collect();
    write(&inputs.out.join("ingest.jsonl"), &jsonl(&lines))?;
    for r in l.data.relations.values() {
        println!("{}: {} rows", r.name(), r.len());
    }
    Ok(())
}

fn stats(inputs: &Inputs) -> Result<()> {
    let l = load(inputs)?;
    let psets = stage("predicates", predicate_sets(&l.data, &l.workload))?;
    let stats = build_stats(&l.data, &psets)?;
    let snapshot = inputs.out.join("stats.bin");
    fs::create_dir_all(&inputs.out).with_context(|| format!("creating {}", inputs.out.display()))?;
    stage("stats", stats.write_snapshot(&snapshot))?;
    let lines: Vec<_> = stats
        .relations
        .iter()
        .map(|(name, r)| {
            json!({
                "relation": name,
                "predicates": r.pset.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "cells": r.mdh.cells.len(),
                "tuples": r.parent.tuples,
                "pages": r.parent.pages,
            })
        })
        .collect();
    write(&inputs.out.join("stats.jsonl"), &jsonl(&lines))?;
    println!("statistics of {} relations written to {}", lines.len(), snapshot.display());
    Ok(())
}

fn optimize(inputs: &Inputs, search: &Search, current: Option<&Path>) -> Result<()> {
    let l = load(inputs)?;
    let psets = stage("predicates", predicate_sets(&l.data, &l.workload))?;
    let stats = build_stats(&l.data, &psets)?;
    let mut problem = stage("optimize", Problem::new(&l.data.schema, &stats, &l.workload, CostParams::default()))?;
    if let Some(path) = current {
        problem = problem.with_current(load_schema(path, &l.data.schema)?);
    } else if search.max_relocation.is_some() {
        bail!("stage optimize: --max-relocation needs --current");
    }
    let params = GaParams {
        population: search.pop,
        generations: search.generations,
        mutation: search.mutation,
        elitism: search.elitism,
        max_fragments: search.max_fragments,
        max_relocation: search.max_relocation,
        seed: search.seed,
    };
    let baseline = stage("optimize", problem.baseline_schema().and_then(|s| problem.schema_cost(&s)))?;
    let outcome = stage("optimize", evolve(&problem, &params))?;
    let best = &outcome.best;
    let schema = match &best.schema {
        Some(s) => s.clone(),
        None => stage("optimize", problem.decode(&best.chromosome, params.max_fragments))?.0,
    };
    write(&inputs.out.join("best.schema"), &schema.to_toml())?;
    write(&inputs.out.join("trace.tsv"), &outcome.trace_tsv())?;
    let report = [
        json!({"kind": "baseline", "cost": baseline}),
        json!({
            "kind": "best",
            "cost": best.cost,
            "ratio": best.cost / baseline,
            "fragments": best.fragments,
            "feasible": best.feasible,
            "relocated": best.relocated,
            "params": params,
        }),
    ];
    write(&inputs.out.join("optimize.jsonl"), &jsonl(&report))?;
    println!(
        "best cost {:.1} ({:.3} of baseline {:.1}), {} fragments",
        best.cost,
        best.cost / baseline,
        baseline,
        best.fragments
    );
    Ok(())
}

fn validate(inputs: &Inputs, schema_path: &Path) -> Result<()> {
    let l = load(inputs)?;
    let schema = load_schema(schema_path, &l.data.schema)?;
    let stats = build_stats(&l.data, &schema.psets())?;
    let report = stage(
        "validate",
        validate_simulation(&schema, &l.data, &stats, &l.workload, &CostParams::default()),
    )?;
    write(&inputs.out.join("validation.jsonl"), &report.to_jsonl())?;
    println!(
        "workload cost error {:.3}% (per query mean {:.3}%, max {:.3}%)",
        report.workload_error * 100.0,
        report.summary.mean * 100.0,
        report.summary.max * 100.0
    );
    Ok(())
}

fn adapt(inputs: &Inputs, schema_path: &Path, remove: Option<&str>, add: Option<&Path>, read: ReadMode) -> Result<()> {
    let l = load(inputs)?;
    let schema = load_schema(schema_path, &l.data.schema)?;
    let stats = build_stats(&l.data, &schema.psets())?;
    let store = stage("catalog", populate_catalog(&schema, &stats))?;
    let plan = match (remove, add) {
        (Some(id), _) => AdaptationPlan::Merge(stage(
            "adapt",
            plan_merge_on_removal(&schema, &l.data.schema, &l.workload, id, &store),
        )?),
        (None, Some(path)) => {
            let sql = fs::read_to_string(path).with_context(|| format!("stage adapt: reading {}", path.display()))?;
            let query = stage("workload", parse_workload(&sql, &l.data.schema))?
                .into_iter()
                .next()
                .ok_or_else(|| anyhow!("stage workload: {} holds no query", path.display()))?;
            let read = match read {
                ReadMode::Parent => SplitRead::Parent,
                ReadMode::Smaller => SplitRead::Smaller,
            };
            AdaptationPlan::Split(stage(
                "adapt",
                plan_split_on_addition(&schema, &l.data.schema, &query, &l.data, &stats, read),
            )?)
        }
        (None, None) => bail!("stage adapt: give --remove-query or --add-query"),
    };
    let result = stage("adapt", apply_adaptation(&plan, &schema, &store, &stats))?;
    write(&inputs.out.join("adapt.jsonl"), &plan.report())?;
    write(&inputs.out.join("adapted.schema"), &result.schema.to_toml())?;
    println!(
        "adaptation cost {} pages; {} -> {} fragments",
        plan.cost(),
        schema.fragment_count(),
        result.schema.fragment_count()
    );
    Ok(())
}

fn export(inputs: &Inputs, schema_path: &Path) -> Result<()> {
    let l = load(inputs)?;
    let schema = load_schema(schema_path, &l.data.schema)?;
    let stats = build_stats(&l.data, &schema.psets())?;
    let store = stage("catalog", populate_catalog(&schema, &stats))?;
    let script = stage("export", export_catalog_script(&store, &schema, &l.data.schema))?;
    write(&inputs.out.join("catalog.sql"), &script)?;
    println!("catalog of {} fragments written", schema.fragment_count());
    Ok(())
}

fn gen_data(sf: f64, seed: u64, out: &Path) -> Result<()> {
    let data = stage("gen-data", generate_star_toy(sf, seed))?;
    stage("gen-data", write_dataset(&data, out))?;
    write(&out.join("workload.sql"), SSB_WORKLOAD_SQL)?;
    let rows: usize = data.relations.values().map(|r| r.len()).sum();
    println!("{rows} rows in {} relations written to {}", data.relations.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { inputs } => ingest(&inputs),
        Command::Stats { inputs } => stats(&inputs),
        Command::Optimize { inputs, search, current } => optimize(&inputs, &search, current.as_deref()),
        Command::Validate { inputs, schema } => validate(&inputs, &schema),
        Command::Adapt {
            inputs,
            schema,
            remove_query,
            add_query,
            split_read,
        } => adapt(&inputs, &schema, remove_query.as_deref(), add_query.as_deref(), split_read),
        Command::ExportCatalog { inputs, schema } => export(&inputs, &schema),
        Command::GenData { sf, seed, out } => gen_data(sf, seed, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hpart: {e:#}");
            ExitCode::FAILURE
        }
    }
}
