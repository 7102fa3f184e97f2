//! Perturbation datasets around a single data instance.
//!
//! Binary mode follows the on/off scheme: a mask `x̃ ∈ {0,1}^d` keeps field
//! `i` when `x̃_i = 1` and substitutes the field's off-state otherwise.
//! Continuous mode samples each field from a normal centered at the instance,
//! truncated at one standard deviation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blackbox::{FeatureKind, SparseEncoding, OFF_ID};
use crate::rng::{self, Rng};
use crate::{BlackBox, FeatureSchema, Matrix, QueryError};

/// Minimum reference batch size for batch-mean off-states.
pub const MIN_REFERENCE_ROWS: usize = 100;

/// Rows per black-box request while labeling.
pub const LABEL_CHUNK_ROWS: usize = 1000;

/// Default LIME-style kernel width.
pub const DEFAULT_KERNEL_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("schema has no fields")]
    EmptySchema,
    #[error("split sizes must all be at least 1")]
    EmptySplit,
    #[error("no off-state rule for field {field}")]
    MissingRule { field: usize },
    #[error("invalid off-state rule for field {field}: {reason}")]
    InvalidRule { field: usize, reason: &'static str },
    #[error("reference batch has {got} rows, at least {MIN_REFERENCE_ROWS} required")]
    ReferenceTooSmall { got: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("sigma must be positive and finite")]
    InvalidSigma,
    #[error("degenerate bounds for field {field}")]
    DegenerateBounds { field: usize },
    #[error("kernel width must be positive")]
    InvalidWidth,
    #[error("model arity {model} does not match mapped input width {mapped}")]
    ArityMismatch { model: usize, mapped: usize },
    #[error("black-box query failed at row {row}: {source}")]
    Query { row: usize, source: QueryError },
}

/// One data instance: a value per schema field. Dense fields hold reals,
/// sparse fields hold vocabulary IDs (`1..=|vocabulary|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInstance {
    pub values: Vec<f64>,
}

impl DataInstance {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), PerturbError> {
        if self.values.len() != schema.len() {
            return Err(PerturbError::InvalidInstance(alloc::format!(
                "instance has {} values, schema has {} fields",
                self.values.len(),
                schema.len()
            )));
        }
        for (i, (v, f)) in self.values.iter().zip(schema.fields()).enumerate() {
            match &f.kind {
                FeatureKind::Dense if !v.is_finite() => {
                    return Err(PerturbError::InvalidInstance(alloc::format!("dense field {i} is not finite")));
                }
                FeatureKind::Sparse { vocabulary, .. } => {
                    let ok = libm::trunc(*v) == *v && *v >= 1.0 && *v <= vocabulary.len() as f64;
                    if !ok {
                        return Err(PerturbError::InvalidInstance(alloc::format!(
                            "sparse field {i} has ID {v}, expected 1..={}",
                            vocabulary.len()
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Substitute used for a switched-off field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OffState {
    /// Sparse field: reserved off ID, or the zero vector under one-hot.
    ZeroEmbedding,
    /// Dense field: mean over a reference batch.
    BatchMean { mean: f64 },
    Fixed { value: f64 },
    /// Sparse field: a uniformly drawn vocabulary ID other than the original.
    ResampleOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffStatePolicy {
    /// One rule per schema field; `None` means the field may never be switched off.
    pub rules: Vec<Option<OffState>>,
    /// Rows of the reference batch used for batch means, if any.
    pub reference_rows: usize,
}

impl OffStatePolicy {
    /// Zero embedding for sparse fields and the reference-batch mean for dense ones.
    /// `reference` rows are instances in schema layout.
    pub fn batch_mean(schema: &FeatureSchema, reference: &Matrix) -> Result<Self, PerturbError> {
        if reference.rows() < MIN_REFERENCE_ROWS {
            return Err(PerturbError::ReferenceTooSmall { got: reference.rows() });
        }
        if reference.cols() != schema.len() {
            return Err(PerturbError::InvalidInstance(alloc::format!(
                "reference batch has {} columns, schema has {} fields",
                reference.cols(),
                schema.len()
            )));
        }
        let n = reference.rows() as f64;
        let rules = schema
            .fields()
            .iter()
            .enumerate()
            .map(|(c, f)| {
                Some(if f.is_sparse() {
                    OffState::ZeroEmbedding
                } else {
                    let mean = reference.iter_rows().map(|r| r[c]).sum::<f64>() / n;
                    OffState::BatchMean { mean }
                })
            })
            .collect();
        Ok(Self { rules, reference_rows: reference.rows() })
    }

    /// Fixed off-value for every dense field, zero embedding for sparse ones.
    pub fn fixed(schema: &FeatureSchema, value: f64) -> Self {
        let rules = schema
            .fields()
            .iter()
            .map(|f| Some(if f.is_sparse() { OffState::ZeroEmbedding } else { OffState::Fixed { value } }))
            .collect();
        Self { rules, reference_rows: 0 }
    }

    pub fn with_rule(mut self, field: usize, rule: OffState) -> Self {
        self.rules[field] = Some(rule);
        self
    }
}

/// Binary on/off masks or continuous real-valued perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self { train: 5000, val: 500, test: 500 }
    }
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    pub fn train_range(&self) -> Range<usize> {
        0..self.train
    }

    pub fn val_range(&self) -> Range<usize> {
        self.train..self.train + self.val
    }

    pub fn test_range(&self) -> Range<usize> {
        self.train + self.val..self.total()
    }

    fn check(&self) -> Result<(), PerturbError> {
        if self.train == 0 || self.val == 0 || self.test == 0 {
            Err(PerturbError::EmptySplit)
        } else {
            Ok(())
        }
    }
}

/// Labeled perturbation dataset. Rows are laid out train, then validation,
/// then test, so the split ranges partition the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDataset {
    pub mode: Mode,
    pub inputs: Matrix,
    pub labels: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub splits: SplitSizes,
    pub seed: u64,
}

/// Borrowed view of one split.
#[derive(Debug, Clone, Copy)]
pub struct SplitView<'a> {
    pub inputs: &'a [f64],
    pub cols: usize,
    pub labels: &'a [f64],
    pub weights: Option<&'a [f64]>,
}

impl SplitView<'_> {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.cols..(i + 1) * self.cols]
    }
}

impl PerturbationDataset {
    /// Assembles a dataset from already labeled rows, checking the invariants.
    pub fn new(
        mode: Mode,
        inputs: Matrix,
        labels: Vec<f64>,
        weights: Option<Vec<f64>>,
        splits: SplitSizes,
        seed: u64,
    ) -> Result<Self, PerturbError> {
        splits.check()?;
        if inputs.rows() != labels.len() || inputs.rows() != splits.total() {
            return Err(PerturbError::InvalidInstance(alloc::format!(
                "{} input rows, {} labels, {} split rows",
                inputs.rows(),
                labels.len(),
                splits.total()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != labels.len() || w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(PerturbError::InvalidInstance("weights must be positive, one per row".into()));
            }
        }
        if mode == Mode::Binary && inputs.as_slice().iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(PerturbError::InvalidInstance("binary inputs must be 0 or 1".into()));
        }
        Ok(Self { mode, inputs, labels, weights, splits, seed })
    }

    /// Number of perturbation variables `d`.
    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    fn view(&self, r: Range<usize>) -> SplitView<'_> {
        let cols = self.inputs.cols();
        SplitView {
            inputs: &self.inputs.as_slice()[r.start * cols..r.end * cols],
            cols,
            labels: &self.labels[r.clone()],
            weights: self.weights.as_deref().map(|w| &w[r]),
        }
    }

    pub fn train(&self) -> SplitView<'_> {
        self.view(self.splits.train_range())
    }

    pub fn val(&self) -> SplitView<'_> {
        self.view(self.splits.val_range())
    }

    pub fn test(&self) -> SplitView<'_> {
        self.view(self.splits.test_range())
    }

    /// Attaches kernel weights computed from the binary masks.
    pub fn with_kernel_weights(mut self, width: f64) -> Result<Self, PerturbError> {
        self.weights = Some(kernel_weights(&self.inputs, width)?);
        Ok(self)
    }
}

/// Random binary masks. Each row zeroes `k ~ U{0..=d}` coordinates chosen
/// uniformly; row 0 (inside the train split) is forced to all ones.
pub fn make_binary_perturbations(d: usize, sizes: SplitSizes, seed: u64) -> Result<Matrix, PerturbError> {
    if d == 0 {
        return Err(PerturbError::EmptySchema);
    }
    sizes.check()?;
    let mut rng = rng::from_seed(rng::derive_seed(seed, 0xB1));
    let n = sizes.total();
    let mut out = Matrix::from_vec(n, d, vec![1.0; n * d]);
    for r in 1..n {
        let zeros = rng.random_range(0..=d);
        let row = out.row_mut(r);
        for i in index::sample(&mut rng, d, zeros) {
            row[i] = 0.0;
        }
    }
    Ok(out)
}

/// The map from a binary mask to a model-ready raw input row.
pub fn map_to_input(
    mask: &[f64],
    x: &DataInstance,
    schema: &FeatureSchema,
    policy: &OffStatePolicy,
    rng: &mut Rng,
) -> Result<Vec<f64>, PerturbError> {
    let mut out = vec![0.0; schema.raw_width()];
    map_into(mask, x, schema, policy, rng, &mut out)?;
    Ok(out)
}

fn map_into(
    mask: &[f64],
    x: &DataInstance,
    schema: &FeatureSchema,
    policy: &OffStatePolicy,
    rng: &mut Rng,
    out: &mut [f64],
) -> Result<(), PerturbError> {
    if mask.len() != schema.len() {
        return Err(PerturbError::InvalidInstance(alloc::format!(
            "mask has {} entries, schema has {} fields",
            mask.len(),
            schema.len()
        )));
    }
    let mut col = 0;
    for (i, field) in schema.fields().iter().enumerate() {
        let on = mask[i] != 0.0;
        let value = if on {
            x.values[i]
        } else {
            let rule = policy.rules.get(i).and_then(Option::as_ref).ok_or(PerturbError::MissingRule { field: i })?;
            match (rule, &field.kind) {
                (OffState::BatchMean { mean }, FeatureKind::Dense) => *mean,
                (OffState::Fixed { value }, _) => *value,
                (OffState::ZeroEmbedding, FeatureKind::Sparse { .. }) => OFF_ID as f64,
                (OffState::ZeroEmbedding, FeatureKind::Dense) => 0.0,
                (OffState::ResampleOther, FeatureKind::Sparse { vocabulary, .. }) => {
                    if vocabulary.len() < 2 {
                        return Err(PerturbError::InvalidRule { field: i, reason: "resampling needs two or more IDs" });
                    }
                    let orig = x.values[i] as usize;
                    let mut pick = rng.random_range(1..vocabulary.len());
                    if pick >= orig {
                        pick += 1;
                    }
                    pick as f64
                }
                (OffState::BatchMean { .. }, FeatureKind::Sparse { .. }) => {
                    return Err(PerturbError::InvalidRule { field: i, reason: "batch mean on a sparse field" });
                }
                (OffState::ResampleOther, FeatureKind::Dense) => {
                    return Err(PerturbError::InvalidRule { field: i, reason: "resampling on a dense field" });
                }
            }
        };
        match &field.kind {
            FeatureKind::Sparse { vocabulary, encoding: SparseEncoding::OneHot } => {
                let slot = &mut out[col..col + vocabulary.len()];
                slot.fill(0.0);
                if value != OFF_ID as f64 {
                    slot[value as usize - 1] = 1.0;
                }
                col += vocabulary.len();
            }
            _ => {
                out[col] = value;
                col += 1;
            }
        }
    }
    Ok(())
}

/// Continuous perturbations: each coordinate drawn from `N(x_i, σ²)`,
/// truncated to `[x_i − σ, x_i + σ]` intersected with its field bounds.
/// Truncating rather than clipping keeps point masses off the bounds.
pub fn make_continuous_perturbations(
    x: &DataInstance,
    sigma: f64,
    bounds: &[(f64, f64)],
    sizes: SplitSizes,
    seed: u64,
) -> Result<Matrix, PerturbError> {
    if x.is_empty() {
        return Err(PerturbError::EmptySchema);
    }
    sizes.check()?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(PerturbError::InvalidSigma);
    }
    if bounds.len() != x.len() {
        return Err(PerturbError::InvalidInstance("one bound pair per field required".into()));
    }
    for (i, (&(lo, hi), &v)) in bounds.iter().zip(&x.values).enumerate() {
        if !(lo < hi) {
            return Err(PerturbError::DegenerateBounds { field: i });
        }
        if !(v >= lo && v <= hi) {
            return Err(PerturbError::InvalidInstance(alloc::format!("field {i} lies outside its bounds")));
        }
    }
    let mut rng = rng::from_seed(rng::derive_seed(seed, 0xC0));
    let d = x.len();
    let n = sizes.total();
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        let row = out.row_mut(r);
        for (i, slot) in row.iter_mut().enumerate() {
            // Standardized interval, inside [−1, 1].
            let a = ((bounds[i].0 - x.values[i]) / sigma).max(-1.0);
            let b = ((bounds[i].1 - x.values[i]) / sigma).min(1.0);
            let z0 = if a > 0.0 { a } else if b < 0.0 { b } else { 0.0 };
            // Uniform proposals accepted with prob. exp(−(z² − z0²)/2) ≥ e^(−1/2).
            let z = loop {
                let z = if a < b { rng.random_range(a..=b) } else { a };
                let u: f64 = rng.random();
                if u <= libm::exp(-(z * z - z0 * z0) / 2.0) {
                    break z;
                }
            };
            *slot = (x.values[i] + sigma * z).clamp(bounds[i].0, bounds[i].1);
        }
    }
    Ok(out)
}

/// How labeling turns perturbation rows into model inputs.
#[derive(Debug, Clone, Copy)]
pub enum InputMap<'a> {
    /// Rows are binary masks mapped through the off-state policy.
    Binary { x: &'a DataInstance, schema: &'a FeatureSchema, policy: &'a OffStatePolicy },
    /// Rows are already model inputs (dense schemas only).
    Identity,
}

/// Labels every row with the black box, querying in chunks of
/// [`LABEL_CHUNK_ROWS`] and writing results back by row index.
pub fn label_with_blackbox<B: BlackBox + ?Sized>(
    model: &mut B,
    inputs: Matrix,
    map: InputMap<'_>,
    splits: SplitSizes,
    seed: u64,
) -> Result<PerturbationDataset, PerturbError> {
    splits.check()?;
    let (mode, width) = match map {
        InputMap::Binary { x, schema, .. } => {
            x.validate(schema)?;
            (Mode::Binary, schema.raw_width())
        }
        InputMap::Identity => (Mode::Continuous, inputs.cols()),
    };
    if model.arity() != width {
        return Err(PerturbError::ArityMismatch { model: model.arity(), mapped: width });
    }
    let mut rng = rng::from_seed(rng::derive_seed(seed, 0x1A));
    let mut labels = Vec::with_capacity(inputs.rows());
    let mut start = 0;
    while start < inputs.rows() {
        let end = (start + LABEL_CHUNK_ROWS).min(inputs.rows());
        let chunk = match map {
            InputMap::Binary { x, schema, policy } => {
                let mut m = Matrix::zeros(end - start, width);
                for r in start..end {
                    map_into(inputs.row(r), x, schema, policy, &mut rng, m.row_mut(r - start))?;
                }
                m
            }
            InputMap::Identity => inputs.slice_rows(start, end),
        };
        let out = model.predict_batch(&chunk).map_err(|source| {
            let row = match &source {
                QueryError::NonFinite { index } => start + index,
                _ => start,
            };
            PerturbError::Query { row, source }
        })?;
        labels.extend(out);
        start = end;
    }
    PerturbationDataset::new(mode, inputs, labels, None, splits, seed)
}

/// Kernel weights `exp(−D²/width²)`, with `D` the cosine distance between a
/// mask and the all-ones vector. An all-zero mask gets `D = 1`.
pub fn kernel_weights(inputs: &Matrix, width: f64) -> Result<Vec<f64>, PerturbError> {
    if !(width > 0.0) {
        return Err(PerturbError::InvalidWidth);
    }
    let d = inputs.cols() as f64;
    Ok(inputs
        .iter_rows()
        .map(|r| {
            let dot: f64 = r.iter().sum();
            let norm = libm::sqrt(r.iter().map(|v| v * v).sum::<f64>());
            let dist = if norm == 0.0 { 1.0 } else { 1.0 - dot / (norm * libm::sqrt(d)) };
            let dist = dist.max(0.0);
            libm::exp(-(dist * dist) / (width * width))
        })
        .collect())
}
