use std::collections::BTreeMap;

use glider_core::crossing::{
    bucketize_dense, cardinality_report, cross_ids, vocab_from_counts, BucketSpec, CardinalityReport, ColumnKind,
    CrossFeatureSpec, Table,
};
use serde::Serialize;

use super::args::{Command, CrossArgs};
use crate::error::{Error, Result};
use crate::formats::{read_csv, read_interactions, read_json, read_schema, table_from_csv, write_csv, write_json, CsvData};
use crate::parallel;

#[derive(Debug, Serialize)]
struct CrossesDoc<'a> {
    threshold: u64,
    max_bins: usize,
    build_rows: usize,
    buckets: &'a BTreeMap<String, BucketSpec>,
    crosses: &'a [CrossFeatureSpec],
    config: &'a Command,
}

#[derive(Debug, Serialize)]
struct CardinalityOut {
    #[serde(flatten)]
    report: CardinalityReport,
    /// Rows of the full data with a missing crossed field (mapped to ID 0).
    missing_rows: usize,
}

#[derive(Debug, Serialize)]
struct CardinalityDoc<'a> {
    crosses: Vec<CardinalityOut>,
    config: &'a Command,
}

pub fn run(a: &CrossArgs, command: &Command, jobs: usize) -> Result<()> {
    if a.max_bins == 0 {
        return Err(Error::Usage("--max-bins must be at least 1".into()));
    }
    let schema = read_schema(&a.schema)?;
    let data = read_csv(&a.data)?;
    let table = table_from_csv(&data, &schema)?;
    let build_rows = a.build_rows.unwrap_or(table.rows.len());
    if build_rows == 0 || build_rows > table.rows.len() {
        return Err(Error::Format(format!("--build-rows {build_rows} is outside 1..={}", table.rows.len())));
    }
    let mut interactions = read_interactions(&read_json(&a.interactions)?, &schema)?;
    if let Some(k) = a.k {
        interactions.truncate(k);
    }
    for fields in &interactions {
        for f in fields {
            if schema.index_of(f).is_none() || table.column(f).is_none() {
                return Err(Error::Cross(glider_core::crossing::CrossError::UnknownField(f.clone())));
            }
        }
    }

    let buckets = fit_buckets(&table, &interactions, build_rows, a.max_bins);
    let pool = parallel::thread_pool(jobs);
    let mut specs = Vec::with_capacity(interactions.len());
    for fields in &interactions {
        let counts = parallel::count_combinations(&pool, &table, fields, &buckets, build_rows)?;
        let spec = vocab_from_counts(&table, fields, &buckets, counts, a.threshold)?;
        log::info!("{}: {} combinations kept", spec.column_name(), spec.vocabulary.len());
        specs.push(spec);
    }

    let mut augmented = CsvData { headers: data.headers.clone(), records: data.records.clone() };
    let mut missing = Vec::with_capacity(specs.len());
    for spec in &specs {
        let (ids, miss) = cross_ids(&table, spec)?;
        augmented.headers.push(spec.column_name());
        for (rec, id) in augmented.records.iter_mut().zip(ids) {
            rec.push(id.to_string());
        }
        missing.push(miss);
    }
    write_csv(&a.out_dir.join("augmented.csv"), &augmented)?;
    write_json(
        &a.out_dir.join("crosses.json"),
        &CrossesDoc { threshold: a.threshold, max_bins: a.max_bins, build_rows, buckets: &buckets, crosses: &specs, config: command },
    )?;
    let crosses = cardinality_report(&specs)
        .into_iter()
        .zip(missing)
        .map(|(report, missing_rows)| CardinalityOut { report, missing_rows })
        .collect();
    write_json(&a.out_dir.join("cardinality.json"), &CardinalityDoc { crosses, config: command })
}

/// Quantile buckets for every dense field used by some interaction, fitted on the build rows.
fn fit_buckets(table: &Table, interactions: &[Vec<String>], build_rows: usize, max_bins: usize) -> BTreeMap<String, BucketSpec> {
    let mut out = BTreeMap::new();
    for f in interactions.iter().flatten() {
        let Some(c) = table.column(f) else { continue };
        if table.kinds[c] == ColumnKind::Dense && !out.contains_key(f) {
            let values = &table.numeric_column(c)[..build_rows];
            out.insert(f.clone(), bucketize_dense(f.clone(), values, max_bins).0);
        }
    }
    out
}
