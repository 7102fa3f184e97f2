//! Worker-pool versions of the batch operations. Results are gathered by
//! index, so output never depends on scheduling.

use std::collections::BTreeMap;

use glider_core::bench::{self, BenchError, TrialConfig, TrialReport, TrialScore};
use glider_core::crossing::{self, BucketSpec, CombinationCounts, CrossError, Table};
use glider_core::detect::{madex, MadexConfig, MadexResult};
use glider_core::global::{instance_config, GlobalSummary};
use glider_core::{DataInstance, FeatureSchema};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::models::HandlePool;

pub fn thread_pool(jobs: usize) -> ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool")
}

/// Per-instance explanations over a batch, in batch order. Errors are kept
/// per instance; failing to open a model handle counts as an instance failure.
pub fn explain_batch(
    pool: &ThreadPool,
    models: &HandlePool,
    batch: &[DataInstance],
    schema: &FeatureSchema,
    cfg: &MadexConfig,
) -> Vec<Result<MadexResult, String>> {
    pool.install(|| {
        batch
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let cfg = instance_config(cfg, i);
                let res = models.with(|m| madex(m, x, schema, &cfg).map_err(|e| e.to_string()));
                let out = res.map_err(|e| e.to_string()).and_then(|r| r);
                match &out {
                    Ok(r) => log::debug!("instance {i}: k = {}", r.k),
                    Err(e) => log::warn!("instance {i} skipped: {e}"),
                }
                out
            })
            .collect()
    })
}

pub fn summarize(model: &str, results: &[Result<MadexResult, String>]) -> GlobalSummary {
    GlobalSummary::from_detections(
        model,
        results.iter().map(|r| {
            r.as_ref().map(|r| r.interactions.iter().map(|i| i.features().to_vec()).collect()).map_err(Clone::clone)
        }),
    )
}

/// Trials in parallel: black boxes first, then every (trial, instance) pair.
pub fn run_trials(pool: &ThreadPool, cfg: &TrialConfig) -> Result<TrialReport, BenchError> {
    cfg.check()?;
    pool.install(|| {
        let boxes = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let bb = bench::trial_blackbox(cfg, t);
                if let Ok(bb) = &bb {
                    log::info!("trial {t}: black box test MSE {:.4}", bb.test_mse);
                }
                bb
            })
            .collect::<Result<Vec<_>, _>>()?;
        let points: Vec<Vec<DataInstance>> = (0..cfg.trials).map(|t| bench::instance_points(cfg, t)).collect();
        let jobs: Vec<(usize, usize)> = (0..cfg.trials).flat_map(|t| (0..cfg.instances).map(move |i| (t, i))).collect();
        let scores = jobs
            .par_iter()
            .map(|&(t, i)| {
                let mut bb = boxes[t].clone();
                bench::score_instance(&mut bb, cfg, t, i, &points[t][i])
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let trials = scores
            .chunks(cfg.instances)
            .enumerate()
            .map(|(t, s)| TrialScore {
                trial: t,
                blackbox_test_mse: boxes[t].test_mse,
                scores: s.to_vec(),
                mean: s.iter().sum::<f64>() / s.len() as f64,
            })
            .collect();
        Ok(TrialReport::from_trials(cfg.function, cfg.detector, trials))
    })
}

/// Combination counts over row shards, merged in shard order.
pub fn count_combinations(
    pool: &ThreadPool,
    table: &Table,
    fields: &[String],
    buckets: &BTreeMap<String, BucketSpec>,
    rows: usize,
) -> Result<CombinationCounts, CrossError> {
    let shards = pool.current_num_threads().max(1);
    let step = rows.div_ceil(shards).max(1);
    let ranges: Vec<_> = (0..rows).step_by(step).map(|s| s..(s + step).min(rows)).collect();
    let parts = pool.install(|| {
        ranges
            .into_par_iter()
            .map(|r| crossing::count_combinations(table, fields, buckets, r))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(parts.into_iter().fold(CombinationCounts::default(), crossing::merge_counts))
}
