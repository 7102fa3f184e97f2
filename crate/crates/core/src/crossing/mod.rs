//! Truncated feature crosses.
//!
//! A cross over fields `I` maps each row's value combination to a sparse ID.
//! Only combinations seen more than `T` times in the building batch get their
//! own ID (`1..=|vocabulary|`, most frequent first); everything else maps to
//! the shared default ID 0. Dense fields are bucketized before crossing.

mod bucket;
mod table;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bucket::{bucketize_dense, BucketSpec, DEFAULT_MAX_BINS};
pub use table::{ColumnKind, Table, Value};

pub const DEFAULT_THRESHOLD: u64 = 100;
pub const DEFAULT_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrossError {
    #[error("unknown field '{0}'")]
    UnknownField(String),
    #[error("dense field '{0}' has no bucket spec")]
    MissingBuckets(String),
    #[error("a cross needs at least two distinct fields")]
    TooFewFields,
    #[error("table error: {0}")]
    Table(String),
}

/// One element of a value combination: a category or a dense bucket.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Token {
    Bucket(u32),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub combination: Vec<Token>,
    pub id: u32,
    pub count: u64,
}

/// Vocabulary of one truncated cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "CrossSpecRepr", into = "CrossSpecRepr")]
pub struct CrossFeatureSpec {
    pub fields: Vec<String>,
    pub threshold: u64,
    /// Bucket spec per field (dense fields only), aligned with `fields`.
    pub buckets: Vec<Option<BucketSpec>>,
    /// Entries ordered by ID.
    pub vocabulary: Vec<VocabEntry>,
    /// Distinct tokens observed per field in the building batch.
    pub field_cardinalities: Vec<u64>,
    pub source_rows: usize,
    /// Building-batch rows skipped because a crossed field was missing.
    pub missing_rows: usize,
    index: BTreeMap<Vec<Token>, u32>,
}

#[derive(Serialize, Deserialize)]
struct CrossSpecRepr {
    fields: Vec<String>,
    threshold: u64,
    buckets: Vec<Option<BucketSpec>>,
    vocabulary: Vec<(Vec<Token>, u32, u64)>,
    field_cardinalities: Vec<u64>,
    source_rows: usize,
    missing_rows: usize,
}

impl From<CrossSpecRepr> for CrossFeatureSpec {
    fn from(r: CrossSpecRepr) -> Self {
        let vocabulary: Vec<VocabEntry> =
            r.vocabulary.into_iter().map(|(combination, id, count)| VocabEntry { combination, id, count }).collect();
        let index = vocabulary.iter().map(|e| (e.combination.clone(), e.id)).collect();
        Self {
            fields: r.fields,
            threshold: r.threshold,
            buckets: r.buckets,
            vocabulary,
            field_cardinalities: r.field_cardinalities,
            source_rows: r.source_rows,
            missing_rows: r.missing_rows,
            index,
        }
    }
}

impl From<CrossFeatureSpec> for CrossSpecRepr {
    fn from(s: CrossFeatureSpec) -> Self {
        Self {
            fields: s.fields,
            threshold: s.threshold,
            buckets: s.buckets,
            vocabulary: s.vocabulary.into_iter().map(|e| (e.combination, e.id, e.count)).collect(),
            field_cardinalities: s.field_cardinalities,
            source_rows: s.source_rows,
            missing_rows: s.missing_rows,
        }
    }
}

impl CrossFeatureSpec {
    /// `cross__<field1>__<field2>…`
    pub fn column_name(&self) -> String {
        let mut name = String::from("cross");
        for f in &self.fields {
            name.push_str("__");
            name.push_str(f);
        }
        name
    }

    /// Cross ID of a combination; [`DEFAULT_ID`] when unseen or under threshold.
    pub fn lookup(&self, combination: &[Token]) -> u32 {
        self.index.get(combination).copied().unwrap_or(DEFAULT_ID)
    }

    /// Cardinality of the emitted sparse column (vocabulary plus the default ID).
    pub fn cardinality(&self) -> usize {
        self.vocabulary.len() + 1
    }

    /// Combination of `row` over this cross's columns (`cols` resolved against a table).
    fn combination(&self, row: &[Value], cols: &[usize]) -> Option<Vec<Token>> {
        combination_of(row, cols, &self.buckets)
    }
}

fn combination_of(row: &[Value], cols: &[usize], buckets: &[Option<BucketSpec>]) -> Option<Vec<Token>> {
    cols.iter()
        .zip(buckets)
        .map(|(&c, b)| match (&row[c], b) {
            (Value::Missing, _) => None,
            (Value::Number(v), Some(spec)) => Some(Token::Bucket(spec.bucket(*v))),
            (Value::Number(v), None) => Some(Token::Category(format!("{v}"))),
            (Value::Category(s), Some(spec)) => s.parse::<f64>().ok().map(|v| Token::Bucket(spec.bucket(v))),
            (Value::Category(s), None) => Some(Token::Category(s.clone())),
        })
        .collect()
}

/// Resolves field names to column indices, checking dense fields have buckets.
fn resolve(table: &Table, fields: &[String], buckets: &BTreeMap<String, BucketSpec>) -> Result<(Vec<usize>, Vec<Option<BucketSpec>>), CrossError> {
    let distinct: BTreeSet<&String> = fields.iter().collect();
    if distinct.len() < 2 || distinct.len() != fields.len() {
        return Err(CrossError::TooFewFields);
    }
    let mut cols = Vec::with_capacity(fields.len());
    let mut specs = Vec::with_capacity(fields.len());
    for f in fields {
        let c = table.column(f).ok_or_else(|| CrossError::UnknownField(f.clone()))?;
        let spec = match table.kinds[c] {
            ColumnKind::Dense => Some(buckets.get(f).cloned().ok_or_else(|| CrossError::MissingBuckets(f.clone()))?),
            ColumnKind::Sparse => None,
        };
        cols.push(c);
        specs.push(spec);
    }
    Ok((cols, specs))
}

/// Combination counts over a row range; partial counts from disjoint ranges
/// can be merged with [`merge_counts`].
pub fn count_combinations(
    table: &Table,
    fields: &[String],
    buckets: &BTreeMap<String, BucketSpec>,
    rows: core::ops::Range<usize>,
) -> Result<CombinationCounts, CrossError> {
    let (cols, specs) = resolve(table, fields, buckets)?;
    let mut out = CombinationCounts::default();
    for row in &table.rows[rows] {
        match combination_of(row, &cols, &specs) {
            Some(c) => *out.counts.entry(c).or_insert(0) += 1,
            None => out.missing += 1,
        }
        out.rows += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CombinationCounts {
    pub counts: BTreeMap<Vec<Token>, u64>,
    pub missing: usize,
    pub rows: usize,
}

pub fn merge_counts(mut a: CombinationCounts, b: CombinationCounts) -> CombinationCounts {
    for (k, v) in b.counts {
        *a.counts.entry(k).or_insert(0) += v;
    }
    a.missing += b.missing;
    a.rows += b.rows;
    a
}

/// Builds the vocabulary from merged counts: combinations seen more than
/// `threshold` times get IDs in descending count order (ties lexicographic).
pub fn vocab_from_counts(
    table: &Table,
    fields: &[String],
    buckets: &BTreeMap<String, BucketSpec>,
    counts: CombinationCounts,
    threshold: u64,
) -> Result<CrossFeatureSpec, CrossError> {
    let (_, specs) = resolve(table, fields, buckets)?;
    let mut per_field: Vec<BTreeSet<&Token>> = alloc::vec![BTreeSet::new(); fields.len()];
    for combo in counts.counts.keys() {
        for (set, t) in per_field.iter_mut().zip(combo) {
            set.insert(t);
        }
    }
    let field_cardinalities = per_field.iter().map(|s| s.len() as u64).collect();
    let mut kept: Vec<(Vec<Token>, u64)> = counts.counts.iter().filter(|(_, &c)| c > threshold).map(|(k, &c)| (k.clone(), c)).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let vocabulary: Vec<VocabEntry> = kept
        .into_iter()
        .enumerate()
        .map(|(i, (combination, count))| VocabEntry { combination, id: i as u32 + 1, count })
        .collect();
    let index = vocabulary.iter().map(|e| (e.combination.clone(), e.id)).collect();
    Ok(CrossFeatureSpec {
        fields: fields.to_vec(),
        threshold,
        buckets: specs,
        vocabulary,
        field_cardinalities,
        source_rows: counts.rows,
        missing_rows: counts.missing,
        index,
    })
}

/// Counts every value combination of `fields` in `table` and keeps those
/// occurring more than `threshold` times.
pub fn build_cross_vocab(
    table: &Table,
    fields: &[String],
    threshold: u64,
    buckets: &BTreeMap<String, BucketSpec>,
) -> Result<CrossFeatureSpec, CrossError> {
    let counts = count_combinations(table, fields, buckets, 0..table.rows.len())?;
    vocab_from_counts(table, fields, buckets, counts, threshold)
}

/// Cross IDs for every row of `table`, plus the number of rows with a missing field.
pub fn cross_ids(table: &Table, spec: &CrossFeatureSpec) -> Result<(Vec<u32>, usize), CrossError> {
    let mut cols = Vec::with_capacity(spec.fields.len());
    for f in &spec.fields {
        cols.push(table.column(f).ok_or_else(|| CrossError::UnknownField(f.clone()))?);
    }
    let mut missing = 0;
    let ids = table
        .rows
        .iter()
        .map(|row| match spec.combination(row, &cols) {
            Some(c) => spec.lookup(&c),
            None => {
                missing += 1;
                DEFAULT_ID
            }
        })
        .collect();
    Ok((ids, missing))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedCross {
    pub column: String,
    pub cardinality: usize,
    pub missing_rows: usize,
}

/// Appends one sparse ID column per spec. Original columns are untouched.
pub fn apply_crosses(table: &Table, specs: &[CrossFeatureSpec]) -> Result<(Table, Vec<AppliedCross>), CrossError> {
    let mut out = table.clone();
    let mut report = Vec::with_capacity(specs.len());
    for spec in specs {
        let (ids, missing) = cross_ids(table, spec)?;
        out.push_column(spec.column_name(), ColumnKind::Sparse, ids.into_iter().map(|id| Value::Category(format!("{id}"))))
            .map_err(CrossError::Table)?;
        report.push(AppliedCross { column: spec.column_name(), cardinality: spec.cardinality(), missing_rows: missing });
    }
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityReport {
    pub column: String,
    pub field_cardinalities: Vec<u64>,
    /// Size of the full Cartesian product (saturating).
    pub theoretical: u128,
    pub truncated: usize,
    /// `truncated / theoretical`.
    pub ratio: f64,
}

pub fn cardinality_report(specs: &[CrossFeatureSpec]) -> Vec<CardinalityReport> {
    specs
        .iter()
        .map(|s| {
            let theoretical = s.field_cardinalities.iter().fold(1u128, |acc, &c| acc.saturating_mul(u128::from(c)));
            let truncated = s.vocabulary.len();
            CardinalityReport {
                column: s.column_name(),
                field_cardinalities: s.field_cardinalities.clone(),
                theoretical,
                truncated,
                ratio: if theoretical == 0 { 0.0 } else { truncated as f64 / theoretical as f64 },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
