use std::fmt::Write as _;

use glider_core::bench::{SynthFunction, TrialConfig, TrialReport};
use glider_core::detect::Detector;
use glider_core::NetConfig;
use serde::Serialize;

use super::args::{BenchArgs, Command, DetectorArg};
use super::common::splits;
use crate::error::{Error, Result};
use crate::formats::{write_csv, write_json, write_text, CsvData};
use crate::parallel;

#[derive(Debug, Serialize)]
struct ReportDoc<'a> {
    report: &'a TrialReport,
    trial_config: &'a TrialConfig,
    config: &'a Command,
}

fn trial_config(a: &BenchArgs) -> Result<TrialConfig> {
    let function: SynthFunction = a.function.parse().map_err(|_| Error::Usage(format!("unknown function '{}'", a.function)))?;
    let detector = match a.detector {
        DetectorArg::Nid => Detector::Nid,
        DetectorArg::Gradnid => Detector::GradNid,
    };
    let mut cfg = TrialConfig::new(function, detector);
    cfg.order = a.order;
    cfg.trials = a.trials;
    cfg.instances = a.instances;
    cfg.sigma = a.sigma;
    cfg.splits = splits(a.n_perturb)?;
    cfg.blackbox.samples = a.blackbox_samples;
    cfg.seed = a.seed;
    if let Some(h) = &a.hidden {
        let base = match detector {
            Detector::Nid => NetConfig::nid(),
            Detector::GradNid => NetConfig::gradient_nid(),
        };
        cfg.net = Some(base.with_hidden(&h.0));
    }
    Ok(cfg)
}

fn summary(r: &TrialReport, cfg: &TrialConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "R-precision over {} trials x {} instances, sigma = {}", cfg.trials, cfg.instances, cfg.sigma);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<9} {:<9} {:>16}", "function", "detector", "R-precision");
    let _ = writeln!(s, "{:<9} {:<9} {:>7.3} +- {:<6.3}", r.function.name(), r.detector.as_str(), r.mean, r.std);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>5}  {:>8}  {:>13}", "trial", "mean", "blackbox MSE");
    for t in &r.trials {
        let _ = writeln!(s, "{:>5}  {:>8.3}  {:>13.5}", t.trial, t.mean, t.blackbox_test_mse);
    }
    s
}

pub fn run(a: &BenchArgs, command: &Command, jobs: usize) -> Result<()> {
    let cfg = trial_config(a)?;
    cfg.check().map_err(|e| Error::Usage(e.to_string()))?;
    log::info!("{} trials x {} instances of {} with {}", cfg.trials, cfg.instances, cfg.function.name(), cfg.detector.as_str());
    let pool = parallel::thread_pool(jobs);
    let report = parallel::run_trials(&pool, &cfg)?;
    write_json(&a.out_dir.join("report.json"), &ReportDoc { report: &report, trial_config: &cfg, config: command })?;
    let grid = CsvData {
        headers: ["trial", "instance", "r_precision"].map(String::from).to_vec(),
        records: report
            .trials
            .iter()
            .flat_map(|t| t.scores.iter().enumerate().map(move |(i, s)| vec![t.trial.to_string(), i.to_string(), s.to_string()]))
            .collect(),
    };
    write_csv(&a.out_dir.join("grid.csv"), &grid)?;
    write_text(&a.out_dir.join("summary.txt"), &summary(&report, &cfg))?;
    log::info!("mean R-precision {:.3} +- {:.3}", report.mean, report.std);
    Ok(())
}
