use std::fs;
use std::path::{Path, PathBuf};

use deepkm::harness::{format_table, run, run_suite, RunReport};
use deepkm::metrics::evaluate;

use crate::args::{Invocation, Mode, Truth};
use crate::config::ExperimentFile;
use crate::dataset::DatasetSource;
use crate::emit::{emit_projection, emit_run, emit_suite, parse_report};
use crate::error::{CliError, Result};
use crate::project::project_2d;

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    /// Human-readable summary for stdout.
    pub summary: String,
    /// Runs that did not complete.
    pub failed_runs: usize,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed_runs > 0)
    }
}

/// Reads labels from a run JSON (`assignments`) or from one integer per line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(parse_report(&text)?.assignments);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| CliError::ConfigFile {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("not a label: {l:?}"),
            })
        })
        .collect()
}

fn single_config(experiment: &ExperimentFile) -> deepkm::harness::TrainConfig {
    experiment
        .config
        .clone()
        .with_method(experiment.methods[0])
        .with_seed(experiment.seeds[0])
}

fn summarize(report: &RunReport) -> String {
    match &report.metrics {
        Some(m) => format!(
            "{} seed {}: ACC {:.4}  NMI {:.4}  ({:.1}s)\n",
            report.method, report.seed, m.acc, m.nmi, report.wall_clock_secs
        ),
        None => format!("{} seed {}: done ({:.1}s)\n", report.method, report.seed, report.wall_clock_secs),
    }
}

pub fn execute(invocation: &Invocation) -> Result<Outcome> {
    match invocation {
        Invocation::Eval { pred, truth } => {
            let pred = read_labels(pred)?;
            let truth = match truth {
                Truth::File(p) => read_labels(p)?,
                Truth::Dataset(spec) => {
                    let ds = spec.parse::<DatasetSource>()?.load()?;
                    ds.labels()
                        .ok_or_else(|| CliError::Usage(format!("dataset {spec:?} has no labels")))?
                        .to_vec()
                }
            };
            let m = evaluate(&pred, &truth)?;
            Ok(Outcome {
                summary: format!("acc\t{}\nnmi\t{}\n", m.acc, m.nmi),
                ..Default::default()
            })
        }
        Invocation::Train { mode, experiment } => {
            let dataset = experiment.dataset.load()?;
            match mode {
                Mode::Suite => {
                    let result = run_suite(&dataset, &experiment.config, &experiment.seeds, &experiment.methods);
                    let written = emit_suite(&result, &experiment.out)?;
                    let mut summary = format_table(&result.rows);
                    for f in &result.failures {
                        summary.push_str(&format!("FAILED {} seed {}: {}\n", f.method, f.seed, f.message));
                    }
                    Ok(Outcome {
                        written,
                        summary,
                        failed_runs: result.failures.len(),
                    })
                }
                Mode::Run | Mode::Project => {
                    let report = run(&dataset, &single_config(experiment))?;
                    let mut written = emit_run(&report, &experiment.out)?;
                    if *mode == Mode::Project {
                        let latents = report.latents.as_ref().expect("fresh reports carry latents");
                        let projection = project_2d(latents.view(), &report.assignments, dataset.labels())?;
                        written.push(emit_projection(&report, &projection, &experiment.out)?);
                    }
                    Ok(Outcome {
                        written,
                        summary: summarize(&report),
                        failed_runs: 0,
                    })
                }
            }
        }
    }
}
