use glider_core::detect::{madex_with_artifacts, MadexResult};
use glider_core::FeatureSchema;
use serde::Serialize;
use serde_json::Value;

use super::args::{Command, ExplainArgs};
use super::common::{describe, madex_config, model_spec, reference_matrix, DefaultBounds};
use crate::error::{Error, Result};
use crate::formats::{read_instance, read_schema, write_dataset, write_json};

#[derive(Debug, Serialize)]
pub struct InteractionOut {
    /// 1-based feature indices.
    pub features: Vec<usize>,
    pub names: Vec<String>,
    pub strength: f64,
}

#[derive(Debug, Serialize)]
pub struct ResultDoc<'a> {
    pub instance_id: Value,
    pub detector: &'static str,
    pub k: usize,
    pub interactions: Vec<InteractionOut>,
    pub seed: u64,
    pub config_hash: &'a str,
    pub surrogate_val_mse: f64,
    pub k_path: &'a [f64],
    pub config: &'a Command,
}

impl<'a> ResultDoc<'a> {
    pub fn new(instance_id: Value, r: &'a MadexResult, schema: &FeatureSchema, config: &'a Command) -> Self {
        let interactions = r
            .interactions
            .iter()
            .map(|i| {
                let (features, names) = describe(schema, i.features());
                InteractionOut { features, names, strength: i.strength }
            })
            .collect();
        Self {
            instance_id,
            detector: r.detector.as_str(),
            k: r.k,
            interactions,
            seed: r.seed,
            config_hash: &r.config_hash,
            surrogate_val_mse: r.surrogate_val_mse,
            k_path: &r.k_path,
            config,
        }
    }
}

pub fn run(a: &ExplainArgs, command: &Command, _jobs: usize) -> Result<()> {
    let spec = model_spec(&a.model)?;
    let mut model = spec.open()?;
    let schema = match &a.schema {
        Some(p) => read_schema(p)?,
        None => FeatureSchema::dense(model.arity())?,
    };
    let (id, x) = read_instance(&a.instance, &schema)?;
    let reference = reference_matrix(&a.detect, &schema)?;
    let cfg = madex_config(&a.detect, &schema, reference.as_ref(), DefaultBounds::AroundInstance(&x), false)?;
    log::info!("explaining instance {id} with {} on {}", cfg.detector.as_str(), model.name());
    let art = madex_with_artifacts(model.as_mut(), &x, &schema, &cfg)?;
    log::info!("selected k = {}", art.result.k);

    let doc = ResultDoc::new(id, &art.result, &schema, command);
    match &a.out {
        Some(path) => write_json(path, &doc)?,
        None => {
            let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
            println!("{text}");
        }
    }
    if let Some(prefix) = &a.save_dataset {
        let perturbation = serde_json::to_value(&cfg.perturbation).map_err(|e| Error::Format(e.to_string()))?;
        write_dataset(prefix, &art.dataset, perturbation, cfg.kernel_width)?;
    }
    if let Some(path) = &a.save_net {
        write_json(path, &art.net)?;
    }
    Ok(())
}
