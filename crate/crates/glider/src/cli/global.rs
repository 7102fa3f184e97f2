use std::collections::BTreeMap;
use std::fmt::Write as _;

use glider_core::global::{prune_subsets, GlobalSummary, InstanceFailure, PruneRule};
use glider_core::FeatureSchema;
use serde::Serialize;

use super::args::{Command, GlobalArgs, PruneArg};
use super::common::{describe, madex_config, model_spec, reference_matrix, DefaultBounds};
use crate::error::{Error, Result};
use crate::formats::{self, read_csv, read_schema, write_csv, write_json, write_text, CsvData};
use crate::models::HandlePool;
use crate::parallel;

#[derive(Debug, Serialize)]
pub struct EntryOut {
    pub rank: usize,
    /// 1-based feature indices.
    pub features: Vec<usize>,
    pub names: Vec<String>,
    pub order: usize,
    pub count: usize,
}

#[derive(Debug, Serialize)]
pub struct PruneOut {
    pub k: usize,
    pub rule: PruneRule,
    pub entries_before: usize,
}

#[derive(Debug, Serialize)]
pub struct SummaryDoc<'a> {
    pub model: &'a str,
    pub detector: &'static str,
    pub batch_size: usize,
    pub effective_batch_size: usize,
    pub failures: &'a [InstanceFailure],
    pub pruned: Option<PruneOut>,
    pub entries: Vec<EntryOut>,
    /// Distinct interactions per order.
    pub order_histogram: BTreeMap<usize, usize>,
    /// Total occurrences per order.
    pub occurrence_histogram: BTreeMap<usize, usize>,
    pub seed: u64,
    pub config_hash: String,
    pub config: &'a Command,
}

fn entries(summary: &GlobalSummary, schema: &FeatureSchema) -> Vec<EntryOut> {
    summary
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (features, names) = describe(schema, &e.features);
            EntryOut { rank: i + 1, features, names, order: e.order(), count: e.count }
        })
        .collect()
}

fn report(doc: &SummaryDoc<'_>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Global interactions of {} ({}), batch {} ({} explained)", doc.model, doc.detector, doc.batch_size, doc.effective_batch_size);
    if let Some(p) = &doc.pruned {
        let _ = writeln!(s, "pruned to K = {} ({:?}) from {} entries", p.k, p.rule, p.entries_before);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>5}  {:>6}  interaction", "rank", "count");
    for e in &doc.entries {
        let _ = writeln!(s, "{:>5}  {:>6}  {{{}}}", e.rank, e.count, e.names.join(", "));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "order  distinct  occurrences");
    for (order, n) in &doc.order_histogram {
        let _ = writeln!(s, "{order:>5}  {n:>8}  {:>11}", doc.occurrence_histogram.get(order).copied().unwrap_or(0));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "seed {}  config {}", doc.seed, doc.config_hash);
    s
}

pub fn run(a: &GlobalArgs, command: &Command, jobs: usize) -> Result<()> {
    if a.batch == 0 {
        return Err(Error::Usage("--batch must be at least 1".into()));
    }
    if a.k == Some(0) {
        return Err(Error::Usage("-K must be at least 1".into()));
    }
    let schema = read_schema(&a.schema)?;
    let data = read_csv(&a.data)?;
    let batch = formats::instances_from_csv(&data, &schema, a.batch)?;
    let models = HandlePool::new(model_spec(&a.model)?);
    let (arity, name) = models.warm()?;
    if arity != schema.raw_width() {
        return Err(Error::Format(format!("model takes {arity} inputs, schema maps to {}", schema.raw_width())));
    }
    // The batch doubles as the reference for dense off states.
    let reference = match reference_matrix(&a.detect, &schema)? {
        Some(m) => m,
        None => formats::dense_matrix(&batch),
    };
    let cfg = madex_config(&a.detect, &schema, Some(&reference), DefaultBounds::BatchRange(&batch), true)?;
    log::info!("explaining {} instances with {} on {} using {jobs} workers", batch.len(), cfg.detector.as_str(), name);

    let pool = parallel::thread_pool(jobs);
    let results = parallel::explain_batch(&pool, &models, &batch, &schema, &cfg);
    let full = parallel::summarize(&name, &results);
    let (summary, pruned) = match a.k {
        Some(k) => {
            let rule = match a.prune {
                PruneArg::Subsets => PruneRule::DropSubsets,
                PruneArg::Supersets => PruneRule::DropSupersets,
            };
            (prune_subsets(&full, k, rule), Some(PruneOut { k, rule, entries_before: full.entries.len() }))
        }
        None => (full, None),
    };
    let doc = SummaryDoc {
        model: &summary.model,
        detector: cfg.detector.as_str(),
        batch_size: summary.batch_size,
        effective_batch_size: summary.effective_batch_size,
        failures: &summary.failures,
        pruned,
        entries: entries(&summary, &schema),
        order_histogram: summary.order_histogram(),
        occurrence_histogram: summary.occurrence_histogram(),
        seed: cfg.seed,
        config_hash: format!("{:016x}", cfg.config_hash()),
        config: command,
    };
    write_json(&a.out_dir.join("summary.json"), &doc)?;
    write_text(&a.out_dir.join("report.txt"), &report(&doc))?;
    let rank = CsvData {
        headers: ["rank", "count", "order", "interaction"].map(String::from).to_vec(),
        records: doc
            .entries
            .iter()
            .map(|e| vec![e.rank.to_string(), e.count.to_string(), e.order.to_string(), e.names.join("|")])
            .collect(),
    };
    write_csv(&a.out_dir.join("rank.csv"), &rank)?;
    log::info!("{} distinct interactions, {} failures", doc.entries.len(), doc.failures.len());
    Ok(())
}
