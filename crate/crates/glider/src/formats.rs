//! File formats: JSON documents, CSV tables, schemas, instances, perturbation
//! datasets and net snapshots.

use std::fs;
use std::path::{Path, PathBuf};

use glider_core::crossing::{ColumnKind, Table, Value as Cell};
use glider_core::perturb::{Mode, PerturbationDataset, SplitSizes};
use glider_core::{DataInstance, FeatureKind, FeatureSchema, Matrix};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, text).map_err(Error::io(path))
}

/// Reads a schema JSON (`{"fields":[{"name":…,"kind":"dense"|"sparse",…}]}`)
/// and validates it.
pub fn read_schema(path: &Path) -> Result<FeatureSchema> {
    let raw: FeatureSchema = read_json(path)?;
    Ok(FeatureSchema::new(raw.fields().to_vec())?)
}

/// A CSV file as header plus string records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvData {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvData {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

pub fn read_csv(path: &Path) -> Result<CsvData> {
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(err)?;
    let headers = reader.headers().map_err(err)?.iter().map(str::to_string).collect();
    let records = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(err)?;
    Ok(CsvData { headers, records })
}

pub fn write_csv(path: &Path, data: &CsvData) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(&data.headers).map_err(err)?;
    for r in &data.records {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(Error::io(path))
}

/// Typed table: schema fields take their kind, other columns are categorical.
/// Empty cells are missing.
pub fn table_from_csv(data: &CsvData, schema: &FeatureSchema) -> Result<Table> {
    let kinds: Vec<ColumnKind> = data
        .headers
        .iter()
        .map(|h| match schema.index_of(h).map(|i| &schema.fields()[i].kind) {
            Some(FeatureKind::Dense) => ColumnKind::Dense,
            _ => ColumnKind::Sparse,
        })
        .collect();
    let mut table = Table::new(data.headers.clone(), kinds.clone());
    for (r, rec) in data.records.iter().enumerate() {
        let row = rec
            .iter()
            .zip(&kinds)
            .enumerate()
            .map(|(c, (cell, kind))| {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Ok(Cell::Missing);
                }
                match kind {
                    ColumnKind::Dense => cell.parse::<f64>().map(Cell::Number).map_err(|_| {
                        Error::Format(format!("row {}: column '{}' is not numeric: '{cell}'", r + 1, data.headers[c]))
                    }),
                    ColumnKind::Sparse => Ok(Cell::Category(cell.to_string())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        table.push_row(row).map_err(|e| Error::Format(format!("row {}: {e}", r + 1)))?;
    }
    Ok(table)
}

/// Value of one schema field from its textual form: numbers for dense
/// fields, vocabulary entries (or their 1-based IDs) for sparse fields.
pub fn field_value(schema: &FeatureSchema, field: usize, text: &str) -> Result<f64> {
    let spec = &schema.fields()[field];
    let text = text.trim();
    match &spec.kind {
        FeatureKind::Dense => text
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Format(format!("field '{}': '{text}' is not a finite number", spec.name))),
        FeatureKind::Sparse { vocabulary, .. } => vocabulary
            .iter()
            .position(|v| v == text)
            .map(|i| (i + 1) as f64)
            .ok_or_else(|| Error::Format(format!("field '{}': '{text}' is not in the vocabulary", spec.name))),
    }
}

/// The first `rows` records as instances over the schema fields.
pub fn instances_from_csv(data: &CsvData, schema: &FeatureSchema, rows: usize) -> Result<Vec<DataInstance>> {
    if rows > data.records.len() {
        return Err(Error::Format(format!("batch of {rows} rows requested, data has {}", data.records.len())));
    }
    let cols = schema
        .fields()
        .iter()
        .map(|f| data.column(&f.name).ok_or_else(|| Error::Format(format!("data has no column for field '{}'", f.name))))
        .collect::<Result<Vec<_>>>()?;
    data.records[..rows]
        .iter()
        .enumerate()
        .map(|(r, rec)| {
            let values = cols
                .iter()
                .enumerate()
                .map(|(i, &c)| field_value(schema, i, &rec[c]).map_err(|e| Error::Format(format!("row {}: {e}", r + 1))))
                .collect::<Result<Vec<_>>>()?;
            Ok(DataInstance::new(values))
        })
        .collect()
}

/// Dense reference rows (every schema field must be dense) for batch-mean off states.
pub fn dense_matrix(instances: &[DataInstance]) -> Matrix {
    let cols = instances.first().map_or(0, DataInstance::len);
    let mut m = Matrix::zeros(0, cols);
    for x in instances {
        m.push_row(&x.values);
    }
    m
}

/// Instance file: a bare JSON array, or `{"id": …, "values": […]}` where
/// sparse values may be vocabulary strings.
pub fn read_instance(path: &Path, schema: &FeatureSchema) -> Result<(Value, DataInstance)> {
    let doc: Value = read_json(path)?;
    let (id, values) = match &doc {
        Value::Array(a) => (Value::from(0), a.clone()),
        Value::Object(o) => (
            o.get("id").cloned().unwrap_or(Value::from(0)),
            o.get("values").and_then(Value::as_array).cloned().ok_or_else(|| {
                Error::Format(format!("{}: instance object needs a \"values\" array", path.display()))
            })?,
        ),
        _ => return Err(Error::Format(format!("{}: instance must be an array or object", path.display()))),
    };
    if values.len() != schema.len() {
        return Err(Error::Format(format!("instance has {} values, schema has {} fields", values.len(), schema.len())));
    }
    let parsed = values
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Value::Number(n) => Ok(n.as_f64().unwrap_or(f64::NAN)),
            Value::String(s) => field_value(schema, i, s),
            other => Err(Error::Format(format!("instance value {other} is neither number nor string"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let x = DataInstance::new(parsed);
    x.validate(schema)?;
    Ok((id, x))
}

/// Sidecar manifest of a saved perturbation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub mode: Mode,
    pub seed: u64,
    pub rows: usize,
    pub dim: usize,
    pub splits: SplitSizes,
    /// Row ranges `[start, end)` of train, validation and test.
    pub boundaries: [[usize; 2]; 3],
    pub weighted: bool,
    /// Perturbation policy (off states or σ and bounds).
    pub perturbation: Value,
    pub kernel_width: Option<f64>,
}

/// Paths `<prefix>.csv` and `<prefix>.manifest.json`.
pub fn dataset_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let s = prefix.as_os_str().to_string_lossy();
    (PathBuf::from(format!("{s}.csv")), PathBuf::from(format!("{s}.manifest.json")))
}

pub fn write_dataset(prefix: &Path, ds: &PerturbationDataset, perturbation: Value, kernel_width: Option<f64>) -> Result<()> {
    let (csv_path, manifest_path) = dataset_paths(prefix);
    let d = ds.dim();
    let mut headers: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    headers.push("label".into());
    if ds.weights.is_some() {
        headers.push("weight".into());
    }
    let records = (0..ds.inputs.rows())
        .map(|r| {
            let mut rec: Vec<String> = ds.inputs.row(r).iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{:?}", ds.labels[r]));
            if let Some(w) = &ds.weights {
                rec.push(format!("{:?}", w[r]));
            }
            rec
        })
        .collect();
    write_csv(&csv_path, &CsvData { headers, records })?;
    let s = ds.splits;
    let manifest = DatasetManifest {
        mode: ds.mode,
        seed: ds.seed,
        rows: ds.inputs.rows(),
        dim: d,
        splits: s,
        boundaries: [
            [s.train_range().start, s.train_range().end],
            [s.val_range().start, s.val_range().end],
            [s.test_range().start, s.test_range().end],
        ],
        weighted: ds.weights.is_some(),
        perturbation,
        kernel_width,
    };
    write_json(&manifest_path, &manifest)
}

pub fn read_dataset(prefix: &Path) -> Result<(PerturbationDataset, DatasetManifest)> {
    let (csv_path, manifest_path) = dataset_paths(prefix);
    let manifest: DatasetManifest = read_json(&manifest_path)?;
    let data = read_csv(&csv_path)?;
    let d = manifest.dim;
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("{}: bad number '{s}'", csv_path.display())));
    let mut inputs = Matrix::zeros(0, d);
    let mut labels = Vec::with_capacity(data.records.len());
    let mut weights = manifest.weighted.then(Vec::new);
    for rec in &data.records {
        let row = rec[..d].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        inputs.push_row(&row);
        labels.push(num(&rec[d])?);
        if let Some(w) = weights.as_mut() {
            w.push(num(&rec[d + 1])?);
        }
    }
    let ds = PerturbationDataset::new(manifest.mode, inputs, labels, weights, manifest.splits, manifest.seed)?;
    Ok((ds, manifest))
}

/// Field-name lists from a global summary (`entries[].names`) or a JSON
/// array whose items are name lists or 1-based index lists.
pub fn read_interactions(doc: &Value, schema: &FeatureSchema) -> Result<Vec<Vec<String>>> {
    let items = match doc {
        Value::Object(o) => o
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Format("interactions object needs an \"entries\" array".into()))?
            .iter()
            .map(|e| e.get("names").cloned().unwrap_or(Value::Null))
            .collect(),
        Value::Array(a) => a.clone(),
        _ => return Err(Error::Format("interactions must be a summary object or an array".into())),
    };
    items
        .iter()
        .map(|item| {
            let list = item.as_array().ok_or_else(|| Error::Format(format!("interaction {item} is not a list")))?;
            list.iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => n
                        .as_u64()
                        .and_then(|i| schema.fields().get((i as usize).checked_sub(1)?))
                        .map(|f| f.name.clone())
                        .ok_or_else(|| Error::Format(format!("feature index {n} out of range"))),
                    other => Err(Error::Format(format!("bad feature reference {other}"))),
                })
                .collect()
        })
        .collect()
}
