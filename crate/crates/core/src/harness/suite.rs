use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::train::{pretrain, run_with_pretrained, Pretrained};
use super::{Method, NoObserver, RunReport, TrainConfig};
use crate::data::Dataset;

/// Mean ± population standard deviation of ACC and NMI for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub method: Method,
    pub runs: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub method: Method,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
    /// Successful runs ordered by (method list order, seed list order).
    pub reports: Vec<RunReport>,
    pub failures: Vec<RunFailure>,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One row per method, in first-appearance order. Reports without metrics
/// are skipped.
pub fn aggregate(reports: &[RunReport]) -> Vec<SuiteRow> {
    let mut methods: Vec<Method> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
        .into_iter()
        .filter_map(|method| {
            let scores: Vec<(f64, f64)> = reports
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| r.metrics.as_ref().map(|m| (m.acc, m.nmi)))
                .collect();
            if scores.is_empty() {
                return None;
            }
            let accs: Vec<f64> = scores.iter().map(|s| s.0).collect();
            let nmis: Vec<f64> = scores.iter().map(|s| s.1).collect();
            let (acc_mean, acc_std) = mean_std(&accs);
            let (nmi_mean, nmi_std) = mean_std(&nmis);
            Some(SuiteRow {
                method,
                runs: scores.len(),
                acc_mean,
                acc_std,
                nmi_mean,
                nmi_std,
            })
        })
        .collect()
}

/// Runs every (method, seed) pair with the same seed list for all methods.
///
/// The autoencoder is pretrained once per seed and shared by every method of
/// that seed. Failed runs are recorded and the suite carries on.
pub fn run_suite(dataset: &Dataset, base: &TrainConfig, seeds: &[u64], methods: &[Method]) -> SuiteResult {
    let mut by_method: Vec<Vec<RunReport>> = vec![Vec::new(); methods.len()];
    let mut failures = Vec::new();

    for &seed in seeds {
        let seeded = base.clone().with_seed(seed);
        let mut shared: Option<Result<Pretrained, String>> = None;
        for (slot, &method) in methods.iter().enumerate() {
            let config = seeded.clone().with_method(method);
            let outcome = if method.uses_autoencoder() {
                let pre = shared.get_or_insert_with(|| pretrain(dataset, &config).map_err(|e| e.to_string()));
                match pre {
                    Ok(p) => run_with_pretrained(dataset, &config, p, &mut NoObserver).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                }
            } else {
                super::run(dataset, &config).map_err(|e| e.to_string())
            };
            match outcome {
                Ok(report) => by_method[slot].push(report),
                Err(message) => failures.push(RunFailure { method, seed, message }),
            }
        }
    }

    let reports: Vec<RunReport> = by_method.into_iter().flatten().collect();
    SuiteResult {
        rows: aggregate(&reports),
        reports,
        failures,
    }
}

/// Human-readable table with scores in percent, e.g. `87.64 ± 1.55`.
pub fn format_table(rows: &[SuiteRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>16} {:>16}", "method", "ACC", "NMI");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>16} {:>16}",
            r.method.name(),
            format!("{:.2} ± {:.2}", 100.0 * r.acc_mean, 100.0 * r.acc_std),
            format!("{:.2} ± {:.2}", 100.0 * r.nmi_mean, 100.0 * r.nmi_std),
        );
    }
    out
}
