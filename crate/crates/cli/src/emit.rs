use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use deepkm::harness::{RunFailure, RunReport, SuiteResult, SuiteRow};

use crate::error::{CliError, Result};
use crate::project::Projection;

pub const SUITE_HEADER: &str = "method\tacc_mean\tacc_std\tnmi_mean\tnmi_std";

/// File stem shared by everything emitted for one run, e.g. `ours_seed3`.
pub fn run_stem(report: &RunReport) -> String {
    format!("{}_seed{}", report.method.name(), report.seed)
}

/// Pretty JSON with a trailing newline. Field order follows [`RunReport`].
pub fn report_json(report: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report(json: &str) -> Result<RunReport> {
    Ok(serde_json::from_str(json)?)
}

/// `phase epoch reconstruction clustering`; pretraining rows leave the
/// clustering column empty.
pub fn loss_tsv(report: &RunReport) -> String {
    let mut out = String::from("phase\tepoch\treconstruction\tclustering\n");
    for (e, v) in report.pretrain_loss.iter().enumerate() {
        let _ = writeln!(out, "pretrain\t{e}\t{v}\t");
    }
    for (e, (r, c)) in report.reconstruction_loss.iter().zip(&report.clustering_loss).enumerate() {
        let _ = writeln!(out, "finetune\t{e}\t{r}\t{c}");
    }
    out
}

pub fn suite_tsv(rows: &[SuiteRow]) -> String {
    let mut out = format!("{SUITE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.method.name(),
            r.acc_mean,
            r.acc_std,
            r.nmi_mean,
            r.nmi_std
        );
    }
    out
}

pub fn failures_tsv(failures: &[RunFailure]) -> String {
    let mut out = String::from("method\tseed\terror\n");
    for f in failures {
        let message = f.message.replace(['\t', '\n'], " ");
        let _ = writeln!(out, "{}\t{}\t{}", f.method.name(), f.seed, message);
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(CliError::io(&path))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// `<stem>.json` and `<stem>_loss.tsv`.
pub fn emit_run(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let stem = run_stem(report);
    Ok(vec![
        write(dir, &format!("{stem}.json"), &report_json(report)?)?,
        write(dir, &format!("{stem}_loss.tsv"), &loss_tsv(report))?,
    ])
}

/// Every run's files, `suite.tsv`, and `failures.tsv` when something failed.
pub fn emit_suite(result: &SuiteResult, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for report in &result.reports {
        written.extend(emit_run(report, dir)?);
    }
    written.push(write(dir, "suite.tsv", &suite_tsv(&result.rows))?);
    if !result.failures.is_empty() {
        written.push(write(dir, "failures.tsv", &failures_tsv(&result.failures))?);
    }
    Ok(written)
}

/// `<stem>_projection.tsv`.
pub fn emit_projection(report: &RunReport, projection: &Projection, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    write(dir, &format!("{}_projection.tsv", run_stem(report)), &projection.to_tsv())
}
