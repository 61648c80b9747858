//! Validation of simulated statistics against materialized fragments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::materialize::materialize;
use crate::catalog::{populate_catalog, CatalogStore};
use crate::costmodel::{prepare_workload, prepared_workload_costs, CostParams};
use crate::data::Dataset;
use crate::error::Result;
use crate::fragmodel::PartitionSchema;
use crate::optimizer::{Chromosome, Problem};
use crate::stats::{decode_stadistinct, DatasetStats};
use crate::workload::QueryShape;

/// Denominator floor for relative errors.
pub const TINY: f64 = 1e-9;

pub fn relative_error(simulated: f64, exact: f64) -> f64 {
    (simulated - exact).abs() / exact.abs().max(TINY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDelta {
    pub attribute: String,
    pub simulated_distinct: f64,
    pub exact_distinct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentDelta {
    pub fragment: String,
    pub simulated_reltuples: u64,
    pub exact_reltuples: u64,
    pub simulated_relpages: u64,
    pub exact_relpages: u64,
    pub attributes: Vec<AttributeDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryError {
    pub query: String,
    pub simulated: f64,
    pub exact: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl ErrorSummary {
    pub fn of(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return ErrorSummary {
                mean: 0.0,
                std_dev: 0.0,
                min: 0.0,
                max: 0.0,
            };
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        ErrorSummary {
            mean,
            std_dev: var.sqrt(),
            min: errors.iter().copied().fold(f64::INFINITY, f64::min),
            max: errors.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub fragments: Vec<FragmentDelta>,
    pub queries: Vec<QueryError>,
    pub simulated_total: f64,
    pub exact_total: f64,
    /// Relative error of the whole workload's cost.
    pub workload_error: f64,
    /// Summary over per-query errors.
    pub summary: ErrorSummary,
}

impl ValidationReport {
    /// One JSON object per fragment and query, then the summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for f in &self.fragments {
            out.push_str(&serde_json::json!({"kind": "fragment", "delta": f}).to_string());
            out.push('\n');
        }
        for q in &self.queries {
            out.push_str(&serde_json::json!({"kind": "query", "error": q}).to_string());
            out.push('\n');
        }
        out.push_str(
            &serde_json::json!({
                "kind": "summary",
                "simulated_total": self.simulated_total,
                "exact_total": self.exact_total,
                "workload_error": self.workload_error,
                "per_query": self.summary,
            })
            .to_string(),
        );
        out.push('\n');
        out
    }
}

fn fragment_deltas(simulated: &CatalogStore, exact: &CatalogStore) -> Vec<FragmentDelta> {
    let mut out = Vec::new();
    for (id, e) in &exact.relations {
        let Some(s) = simulated.relation(id) else { continue };
        let attributes = exact
            .attributes
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|(name, ea)| {
                let sa = simulated.attribute(id, name)?;
                Some(AttributeDelta {
                    attribute: name.clone(),
                    simulated_distinct: decode_stadistinct(sa.stadistinct, s.reltuples as f64).round(),
                    exact_distinct: decode_stadistinct(ea.stadistinct, e.reltuples as f64).round(),
                })
            })
            .collect();
        out.push(FragmentDelta {
            fragment: id.clone(),
            simulated_reltuples: s.reltuples,
            exact_reltuples: e.reltuples,
            simulated_relpages: s.relpages,
            exact_relpages: e.relpages,
            attributes,
        });
    }
    out
}

/// Materializes `schema`, computes exact per-fragment statistics, and costs
/// the workload once on simulated and once on exact statistics.
pub fn validate_simulation(
    schema: &PartitionSchema,
    data: &Dataset,
    stats: &DatasetStats,
    workload: &[QueryShape],
    params: &CostParams,
) -> Result<ValidationReport> {
    let simulated = populate_catalog(schema, stats)?;
    let exact = materialize(schema, data, stats.target)?.exact_catalog();
    let prepared = prepare_workload(workload)?;
    let sim = prepared_workload_costs(&prepared, schema, &simulated, params, Some(&data.schema))?;
    let ex = prepared_workload_costs(&prepared, schema, &exact, params, Some(&data.schema))?;
    let queries: Vec<QueryError> = sim
        .iter()
        .zip(&ex)
        .map(|(s, e)| QueryError {
            query: s.id.clone(),
            simulated: s.total,
            exact: e.total,
            error: relative_error(s.total, e.total),
        })
        .collect();
    let simulated_total: f64 = sim.iter().map(|c| c.total).sum();
    let exact_total: f64 = ex.iter().map(|c| c.total).sum();
    let errors: Vec<f64> = queries.iter().map(|q| q.error).collect();
    Ok(ValidationReport {
        fragments: fragment_deltas(&simulated, &exact),
        queries,
        simulated_total,
        exact_total,
        workload_error: relative_error(simulated_total, exact_total),
        summary: ErrorSummary::of(&errors),
    })
}

/// Random valid schemas over a problem's predicate sets: chromosomes with
/// one to eight genes of uniform ternary digits, decoded and repaired to at
/// most `max_fragments` fragments.
pub fn random_schemas(problem: &Problem, count: usize, max_fragments: usize, seed: u64) -> Result<Vec<PartitionSchema>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = problem.gene_len();
    (0..count)
        .map(|_| {
            let genes = rng.gen_range(1..=8);
            let ch = Chromosome {
                genes: (0..genes).map(|_| (0..len).map(|_| rng.gen_range(0..3u8)).collect()).collect(),
            };
            Ok(problem.decode(&ch, max_fragments)?.0)
        })
        .collect()
}

/// Ranks with ties sharing their average rank (1-based).
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation: Pearson correlation of the tie-averaged ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "samples differ in length");
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
