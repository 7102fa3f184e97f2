//! Model specifications and per-worker handle pools.

use std::str::FromStr;
use std::sync::Mutex;

use glider_core::bench::{SynthFunction, SYNTH_DIM};
use glider_core::{BlackBox, FnModel, QueryError};
use serde::{Deserialize, Serialize};

use crate::external::{ExternalModel, LaunchSpec};

pub type BoxedModel = Box<dyn BlackBox + Send>;

/// In-process models shipped with the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    Synth(SynthFunction),
    /// `Σ xᵢ` over ten inputs.
    Additive,
}

impl Builtin {
    pub fn open(self) -> BoxedModel {
        match self {
            Builtin::Synth(f) => Box::new(f.model()),
            Builtin::Additive => Box::new(FnModel::new("additive", SYNTH_DIM, |x: &[f64]| x.iter().sum::<f64>())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Synth(f) => f.name(),
            Builtin::Additive => "additive",
        }
    }
}

impl FromStr for Builtin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("additive") {
            return Ok(Builtin::Additive);
        }
        s.parse::<SynthFunction>().map(Builtin::Synth).map_err(|_| format!("unknown builtin model '{s}' (F1..F4, additive)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Builtin(Builtin),
    External(LaunchSpec),
}

impl ModelSpec {
    pub fn open(&self) -> Result<BoxedModel, QueryError> {
        match self {
            ModelSpec::Builtin(b) => Ok(b.open()),
            ModelSpec::External(spec) => Ok(Box::new(ExternalModel::connect(spec)?)),
        }
    }
}

/// Lazily opened handles, at most one per concurrent user.
pub struct HandlePool {
    spec: ModelSpec,
    idle: Mutex<Vec<BoxedModel>>,
}

impl HandlePool {
    pub fn new(spec: ModelSpec) -> Self {
        Self { spec, idle: Mutex::new(Vec::new()) }
    }

    /// Opens one handle up front, surfacing launch errors early.
    pub fn warm(&self) -> Result<(usize, String), QueryError> {
        let m = self.spec.open()?;
        let info = (m.arity(), m.name().to_string());
        self.idle.lock().expect("pool poisoned").push(m);
        Ok(info)
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut dyn BlackBox) -> T) -> Result<T, QueryError> {
        let popped = self.idle.lock().expect("pool poisoned").pop();
        let mut m = match popped {
            Some(m) => m,
            None => self.spec.open()?,
        };
        let out = f(m.as_mut());
        self.idle.lock().expect("pool poisoned").push(m);
        Ok(out)
    }
}
