//! Report files for a finished experiment.
//!
//! `results.csv` has one row per run and depends only on the configuration;
//! wall-clock times go to `timings.csv` so that reruns compare byte for byte.

use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{NailError, Result};
use crate::harness::{CellSummary, EvalReport, RunStatus};
use crate::io::{create_dir, write_file};

pub const RESULTS_HEADER: &str = "variant,lambda,mu,rk,repeat,seed,status,iterations,converged,objective,hs,ap,val_ap,message";
pub const SUMMARY_HEADER: &str = "variant,lambda,mu,rk,runs,ok,hs_mean,hs_std,ap_mean,ap_std,val_ap_mean,val_ap_std,iterations_mean";

fn cell_prefix(c: &crate::harness::Cell) -> String {
    format!("{},{},{},{}", c.variant.name(), c.lambda, c.mu, c.rk)
}

pub fn results_csv(report: &EvalReport) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in &report.runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            cell_prefix(&r.cell),
            r.repeat,
            r.seed,
            r.status.label(),
            r.iterations,
            r.converged,
            r.objective,
            r.hs,
            r.ap,
            r.val_ap,
            match &r.status {
                RunStatus::Failed(msg) => msg.replace([',', '\n'], " "),
                _ => String::new(),
            }
        ));
    }
    out
}

pub fn timings_csv(report: &EvalReport) -> String {
    let mut out = String::from("variant,lambda,mu,rk,repeat,runtime_secs\n");
    for r in &report.runs {
        out.push_str(&format!("{},{},{}\n", cell_prefix(&r.cell), r.repeat, r.runtime_secs));
    }
    out
}

pub fn summary_csv(report: &EvalReport) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in &report.summary {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            cell_prefix(&s.cell),
            s.runs,
            s.ok,
            s.hs_mean,
            s.hs_std,
            s.ap_mean,
            s.ap_std,
            s.val_ap_mean,
            s.val_ap_std,
            s.iterations_mean
        ));
    }
    out
}

/// Objective traces of every repeat of each variant's best cell.
pub fn curves_csv(report: &EvalReport) -> String {
    let mut out = String::from("variant,lambda,mu,rk,repeat,iteration,total,reconstruction,label,hsic\n");
    for &b in &report.best {
        let cell = report.summary[b].cell;
        for r in report.runs.iter().filter(|r| r.cell == cell) {
            for (it, o) in r.trace.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    cell_prefix(&cell),
                    r.repeat,
                    it + 1,
                    o.total,
                    o.reconstruction,
                    o.label,
                    o.hsic
                ));
            }
        }
    }
    out
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    config: &'a ExperimentConfig,
    cells: &'a [CellSummary],
    best: Vec<&'a CellSummary>,
}

/// Config echo, per-cell aggregates and best cells. Undefined aggregates
/// (NaN) appear as `null`.
pub fn summary_json(report: &EvalReport) -> String {
    let doc = SummaryJson { config: &report.config, cells: &report.summary, best: report.best.iter().map(|&b| &report.summary[b]).collect() };
    serde_json::to_string_pretty(&doc).expect("summary serializes")
}

/// Writes `results.csv`, `timings.csv`, `summary.csv`, `summary.json` and
/// `curves.csv` into `dir`, creating it if needed.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    if report.runs.is_empty() {
        return Err(NailError::Config("report has no runs".into()));
    }
    create_dir(dir)?;
    write_file(&dir.join("results.csv"), results_csv(report).as_bytes())?;
    write_file(&dir.join("timings.csv"), timings_csv(report).as_bytes())?;
    write_file(&dir.join("summary.csv"), summary_csv(report).as_bytes())?;
    write_file(&dir.join("summary.json"), summary_json(report).as_bytes())?;
    write_file(&dir.join("curves.csv"), curves_csv(report).as_bytes())
}
