use std::time::Duration;

use glider_core::detect::{Detector, MadexConfig, PerturbationMode};
use glider_core::perturb::{OffStatePolicy, SplitSizes};
use glider_core::{DataInstance, FeatureSchema, Matrix, NetConfig};

use super::args::{DetectArgs, DetectorArg, ModeArg, ModelArgs, Weighting};
use crate::error::{Error, Result};
use crate::external::LaunchSpec;
use crate::formats;
use crate::models::{Builtin, ModelSpec};

pub fn model_spec(args: &ModelArgs) -> Result<ModelSpec> {
    match (&args.model, &args.builtin) {
        (Some(cmd), None) => {
            if args.query_batch == 0 {
                return Err(Error::Usage("--query-batch must be at least 1".into()));
            }
            let mut spec = LaunchSpec::new(cmd.clone());
            spec.cwd = args.model_cwd.clone();
            spec.handshake_timeout = Duration::from_secs(args.handshake_timeout);
            spec.batch_rows = args.query_batch;
            Ok(ModelSpec::External(spec))
        }
        (None, Some(name)) => name.parse::<Builtin>().map(ModelSpec::Builtin).map_err(Error::Usage),
        _ => Err(Error::Usage("exactly one of --model or --builtin is required".into())),
    }
}

pub fn detector(arg: Option<DetectorArg>, batch: bool, order: usize) -> Detector {
    match arg {
        Some(DetectorArg::Nid) => Detector::Nid,
        Some(DetectorArg::Gradnid) => Detector::GradNid,
        None => Detector::default_for(batch, order),
    }
}

pub fn splits(n_perturb: usize) -> Result<SplitSizes> {
    if n_perturb < 10 {
        return Err(Error::Usage("--n-perturb must be at least 10".into()));
    }
    Ok(SplitSizes { train: n_perturb, val: n_perturb / 10, test: n_perturb / 10 })
}

/// Where continuous perturbations are bounded when `--bounds` is absent.
pub enum DefaultBounds<'a> {
    /// `x ± σ`: nothing beyond the truncation itself.
    AroundInstance(&'a DataInstance),
    /// Observed range of each field over the batch.
    BatchRange(&'a [DataInstance]),
}

/// Off states for binary mode: `--off-value`, else reference means, else
/// (for all-sparse schemas) zero embeddings only.
pub fn off_policy(args: &DetectArgs, schema: &FeatureSchema, reference: Option<&Matrix>) -> Result<OffStatePolicy> {
    if let Some(v) = args.off_value {
        return Ok(OffStatePolicy::fixed(schema, v));
    }
    if let Some(m) = reference {
        return Ok(OffStatePolicy::batch_mean(schema, m)?);
    }
    if schema.fields().iter().all(|f| f.is_sparse()) {
        return Ok(OffStatePolicy::fixed(schema, 0.0));
    }
    Err(Error::Usage("binary mode with dense fields needs --reference or --off-value".into()))
}

pub fn reference_matrix(args: &DetectArgs, schema: &FeatureSchema) -> Result<Option<Matrix>> {
    let Some(path) = &args.reference else { return Ok(None) };
    let data = formats::read_csv(path)?;
    let rows = formats::instances_from_csv(&data, schema, data.records.len())?;
    Ok(Some(formats::dense_matrix(&rows)))
}

pub fn madex_config(
    args: &DetectArgs,
    schema: &FeatureSchema,
    reference: Option<&Matrix>,
    bounds: DefaultBounds<'_>,
    batch: bool,
) -> Result<MadexConfig> {
    let detector = detector(args.detector, batch, args.order);
    let perturbation = match args.mode {
        ModeArg::Binary => PerturbationMode::Binary { policy: off_policy(args, schema, reference)? },
        ModeArg::Continuous => {
            let d = schema.len();
            let b = match (args.bounds, bounds) {
                (Some(b), _) => vec![b; d],
                (None, DefaultBounds::AroundInstance(x)) => x.values.iter().map(|v| (v - args.sigma, v + args.sigma)).collect(),
                (None, DefaultBounds::BatchRange(rows)) => (0..d)
                    .map(|c| {
                        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                            (lo.min(x.values[c]), hi.max(x.values[c]))
                        });
                        if lo < hi { (lo, hi) } else { (lo - args.sigma, hi + args.sigma) }
                    })
                    .collect(),
            };
            PerturbationMode::Continuous { sigma: args.sigma, bounds: b }
        }
    };
    let mut cfg = MadexConfig::new(detector, perturbation);
    cfg.order = args.order;
    cfg.splits = splits(args.n_perturb)?;
    cfg.rel_tol = args.rel_tol;
    cfg.seed = args.seed;
    cfg.kernel_width = match args.weighting {
        Weighting::None => None,
        Weighting::Lime => Some(args.kernel_width),
    };
    if args.hidden.is_some() || args.max_epochs.is_some() {
        let mut net = match detector {
            Detector::Nid => NetConfig::nid(),
            Detector::GradNid => NetConfig::gradient_nid(),
        };
        if let Some(h) = &args.hidden {
            net.hidden = h.0.clone();
        }
        if let Some(e) = args.max_epochs {
            net.max_epochs = e;
        }
        cfg.net = Some(net);
    }
    Ok(cfg)
}

/// `[i+1, …]` and field names for a 0-based index set.
pub fn describe(schema: &FeatureSchema, features: &[usize]) -> (Vec<usize>, Vec<String>) {
    let fields = schema.fields();
    (
        features.iter().map(|i| i + 1).collect(),
        features.iter().map(|&i| fields.get(i).map_or_else(|| format!("x{}", i + 1), |f| f.name.clone())).collect(),
    )
}
