//! Uniform access to the prediction model being explained.
//!
//! A [`BlackBox`] maps rows of `p` real inputs to one real output each. The
//! in-process [`FnModel`] wraps a closure; external processes are provided by
//! the `glider` crate through the same trait.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Matrix;

/// Reserved vocabulary ID meaning "switched off" for sparse fields.
pub const OFF_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("input has {got} columns, model expects {expected}")]
    Arity { expected: usize, got: usize },
    #[error("model returned {got} outputs for {expected} inputs")]
    Length { expected: usize, got: usize },
    #[error("model returned a non-finite output at row {index}")]
    NonFinite { index: usize },
    #[error("protocol violation: {message}")]
    Protocol { message: String },
    #[error("model process exited ({status})")]
    Exited { status: String },
    #[error("model launch failed: {0}")]
    Launch(String),
    #[error("handshake timed out after {0} ms")]
    Timeout(u64),
    #[error("invalid model schema: {0}")]
    InvalidSchema(String),
    #[error("model I/O error: {0}")]
    Io(String),
}

/// A deterministic prediction model `f: R^p -> R`.
///
/// Implementors provide [`BlackBox::predict_raw`]; callers use
/// [`BlackBox::predict_batch`], which validates shapes and finiteness.
pub trait BlackBox {
    /// Number of raw input dimensions `p`.
    fn arity(&self) -> usize;

    fn name(&self) -> &str;

    fn predict_raw(&mut self, inputs: &Matrix) -> Result<Vec<f64>, QueryError>;

    fn predict_batch(&mut self, inputs: &Matrix) -> Result<Vec<f64>, QueryError> {
        if inputs.cols() != self.arity() {
            return Err(QueryError::Arity { expected: self.arity(), got: inputs.cols() });
        }
        if inputs.rows() == 0 {
            return Ok(Vec::new());
        }
        let out = self.predict_raw(inputs)?;
        if out.len() != inputs.rows() {
            return Err(QueryError::Length { expected: inputs.rows(), got: out.len() });
        }
        if let Some(index) = out.iter().position(|v| !v.is_finite()) {
            return Err(QueryError::NonFinite { index });
        }
        Ok(out)
    }
}

impl<B: BlackBox + ?Sized> BlackBox for &mut B {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn predict_raw(&mut self, inputs: &Matrix) -> Result<Vec<f64>, QueryError> {
        (**self).predict_raw(inputs)
    }
}

impl<B: BlackBox + ?Sized> BlackBox for Box<B> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn predict_raw(&mut self, inputs: &Matrix) -> Result<Vec<f64>, QueryError> {
        (**self).predict_raw(inputs)
    }
}

/// In-process model backed by a per-row closure.
#[derive(Clone)]
pub struct FnModel<F> {
    name: String,
    arity: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnModel<F> {
    pub fn new(name: impl Into<String>, arity: usize, f: F) -> Self {
        Self { name: name.into(), arity, f }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

impl<F> fmt::Debug for FnModel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel").field("name", &self.name).field("arity", &self.arity).finish()
    }
}

impl<F: Fn(&[f64]) -> f64> BlackBox for FnModel<F> {
    fn arity(&self) -> usize {
        self.arity
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn predict_raw(&mut self, inputs: &Matrix) -> Result<Vec<f64>, QueryError> {
        Ok(inputs.iter_rows().map(|r| (self.f)(r)).collect())
    }
}

/// How a sparse field is presented to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SparseEncoding {
    /// One raw column carrying the vocabulary ID; [`OFF_ID`] when switched off.
    #[default]
    Id,
    /// `|vocabulary|` raw columns; switched off is the all-zero vector.
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Dense,
    /// Vocabulary IDs run `1..=vocabulary.len()`; ID `k` names `vocabulary[k-1]`.
    Sparse {
        vocabulary: Vec<String>,
        #[serde(default)]
        encoding: SparseEncoding,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FieldSpec {
    pub fn dense(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: FeatureKind::Dense }
    }

    pub fn sparse(name: impl Into<String>, vocabulary: Vec<String>) -> Self {
        Self { name: name.into(), kind: FeatureKind::Sparse { vocabulary, encoding: SparseEncoding::Id } }
    }

    /// Raw model columns this field occupies.
    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureKind::Dense => 1,
            FeatureKind::Sparse { encoding: SparseEncoding::Id, .. } => 1,
            FeatureKind::Sparse { vocabulary, encoding: SparseEncoding::OneHot } => vocabulary.len(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.kind, FeatureKind::Sparse { .. })
    }
}

/// Feature fields of a model input. Each field is one perturbation variable,
/// so `d = fields.len()`, and fields map onto contiguous raw column groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    fields: Vec<FieldSpec>,
}

impl FeatureSchema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self, QueryError> {
        if fields.is_empty() {
            return Err(QueryError::InvalidSchema("schema has no fields".to_string()));
        }
        for (i, f) in fields.iter().enumerate() {
            if let FeatureKind::Sparse { vocabulary, .. } = &f.kind {
                if vocabulary.is_empty() {
                    return Err(QueryError::InvalidSchema(alloc::format!(
                        "sparse field '{}' has an empty vocabulary",
                        f.name
                    )));
                }
            }
            if fields[..i].iter().any(|g| g.name == f.name) {
                return Err(QueryError::InvalidSchema(alloc::format!("duplicate field name '{}'", f.name)));
            }
        }
        Ok(Self { fields })
    }

    /// `d` dense fields named `x1..xd`.
    pub fn dense(d: usize) -> Result<Self, QueryError> {
        Self::new((1..=d).map(|i| FieldSpec::dense(alloc::format!("x{i}"))).collect())
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    /// Number of perturbation variables `d`.
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Total raw input width `p`.
    pub fn raw_width(&self) -> usize {
        self.fields.iter().map(FieldSpec::width).sum()
    }

    /// Raw column range of each field, in field order.
    pub fn raw_ranges(&self) -> Vec<core::ops::Range<usize>> {
        let mut start = 0;
        self.fields
            .iter()
            .map(|f| {
                let r = start..start + f.width();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}
