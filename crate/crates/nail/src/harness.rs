//! Repeated, masked, grid-searched runs.
//!
//! Each repeat draws its own seed from the base seed, splits the rows into
//! training and validation parts and masks them. Every variant and grid
//! cell of a repeat sees the same split and masks, so runs can be compared
//! pairwise. Jobs run on a worker pool; results are assembled in job order.

use std::time::Instant;

use nail_core::rng::splitmix64;
use nail_core::solver::{embed_rows, predict_from_embedding};
use nail_core::{average_precision, fit, hamming_score, predict, synthesize, MultiViewDataset, ObjectiveBreakdown, SolverError, Variant};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{NailError, Result};
use crate::io;

/// Seed of a repeat; independent of the variant and the grid cell.
pub fn run_seed(base: u64, repeat: usize) -> u64 {
    base ^ splitmix64(repeat as u64)
}

/// Loads or synthesizes the configured dataset, then subsamples it.
pub fn load_data(cfg: &ExperimentConfig) -> Result<MultiViewDataset> {
    let ds = match &cfg.data {
        DataSource::Manifest(path) => io::load_dataset(path)?,
        DataSource::Synthetic(s) => synthesize(&s.to_spec())?.0,
    };
    Ok(match cfg.subsample {
        Some(count) => ds.subsample(count, cfg.seed),
        None => ds,
    })
}

/// One point of the hyperparameter grid for one variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    #[serde(serialize_with = "variant_name")]
    pub variant: Variant,
    pub lambda: f64,
    pub mu: f64,
    pub rk: f64,
}

fn variant_name<S: serde::Serializer>(v: &Variant, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(v.name())
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed(String),
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
            RunStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub cell: Cell,
    pub repeat: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Hamming score on the hidden training labels.
    pub hs: f64,
    /// Average precision on the hidden training labels.
    pub ap: f64,
    /// Average precision on the validation rows.
    pub val_ap: f64,
    pub runtime_secs: f64,
    pub trace: Vec<ObjectiveBreakdown>,
}

/// Mean and sample standard deviation of a cell's successful runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub cell: Cell,
    pub runs: usize,
    pub ok: usize,
    pub hs_mean: f64,
    pub hs_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
    pub val_ap_mean: f64,
    pub val_ap_std: f64,
    pub iterations_mean: f64,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    /// Ordered by variant, λ, μ, r_k, then repeat.
    pub runs: Vec<RunRecord>,
    /// One entry per variant and grid cell, in the same order.
    pub summary: Vec<CellSummary>,
    /// Index into `summary` of each variant's best cell by validation AP.
    pub best: Vec<usize>,
}

struct RepeatData {
    seed: u64,
    train: MultiViewDataset,
    validation: MultiViewDataset,
}

fn prepare_repeat(ds: &MultiViewDataset, cfg: &ExperimentConfig, repeat: usize) -> Result<RepeatData> {
    let seed = run_seed(cfg.seed, repeat);
    let (train, validation) = ds.split_rows(cfg.train_fraction, seed)?;
    let mask = cfg.mask.spec(seed);
    let train = train.apply_feature_mask(&mask)?.apply_label_mask(&mask)?;
    let validation = validation.apply_feature_mask(&mask)?.with_all_labels_hidden();
    Ok(RepeatData { seed, train, validation })
}

/// Every (variant, λ, μ, r_k) cell in report order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::with_capacity(cfg.variants.len() * cfg.cell_count());
    for v in &cfg.variants {
        for &lambda in &cfg.lambda_grid {
            for &mu in &cfg.mu_grid {
                for &rk in &cfg.rk_grid {
                    out.push(Cell { variant: v.0, lambda, mu, rk });
                }
            }
        }
    }
    out
}

fn run_job(data: &RepeatData, cfg: &ExperimentConfig, cell: Cell, repeat: usize) -> RunRecord {
    let start = Instant::now();
    let opts = &cfg.solver;
    let solver = opts.solver_config(cell.variant, cell.lambda, cell.mu, cell.rk, data.seed);
    let mut record = RunRecord {
        cell,
        repeat,
        seed: data.seed,
        status: RunStatus::Ok,
        iterations: 0,
        converged: false,
        objective: f64::NAN,
        hs: f64::NAN,
        ap: f64::NAN,
        val_ap: f64::NAN,
        runtime_secs: 0.0,
        trace: Vec::new(),
    };
    match fit(&data.train, &solver) {
        Ok((state, trace)) => {
            record.iterations = trace.iterations;
            record.converged = trace.converged;
            record.objective = trace.objectives.last().map_or(f64::NAN, |o| o.total);
            record.trace = trace.objectives;
            let held_out = data.train.eval_mask();
            let pred = predict(&state, opts.threshold);
            record.hs = hamming_score(&pred.labels, &held_out).unwrap_or(f64::NAN);
            record.ap = average_precision(&pred.scores, &held_out).unwrap_or(f64::NAN);
            record.val_ap = embed_rows(&state, &data.validation, &solver, opts.embed_steps)
                .and_then(|f| average_precision(&predict_from_embedding(&f, &state, opts.threshold).scores, &data.validation.eval_mask()))
                .unwrap_or(f64::NAN);
        }
        Err(SolverError::Diverged { trace, .. }) => {
            record.status = RunStatus::Diverged;
            record.iterations = trace.iterations;
            record.trace = trace.objectives;
        }
        Err(SolverError::Invalid(e)) => record.status = RunStatus::Failed(e.to_string()),
    }
    record.runtime_secs = start.elapsed().as_secs_f64();
    record
}

/// Runs the whole protocol on `ds`. Solver failures are recorded in the
/// affected runs; data and configuration problems abort.
pub fn run_experiment_on(ds: &MultiViewDataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let repeats = (0..cfg.repeats).map(|r| prepare_repeat(ds, cfg, r)).collect::<Result<Vec<_>>>()?;
    let cells = cells(cfg);
    let jobs: Vec<(Cell, usize)> = cells.iter().flat_map(|&c| (0..cfg.repeats).map(move |r| (c, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| NailError::Config(format!("worker pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| jobs.par_iter().map(|&(c, r)| run_job(&repeats[r], cfg, c, r)).collect());
    let summary: Vec<CellSummary> = runs.chunks(cfg.repeats).map(summarize).collect();
    let best = best_cells(cfg, &summary);
    Ok(EvalReport { config: cfg.clone(), runs, summary, best })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let ds = load_data(cfg)?;
    run_experiment_on(&ds, cfg)
}

/// Mean and sample standard deviation (0 for a single value, NaN for none).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Aggregates the runs of one cell; only runs with status `ok` count.
pub fn summarize(runs: &[RunRecord]) -> CellSummary {
    let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.status == RunStatus::Ok).collect();
    let stat = |get: fn(&RunRecord) -> f64| mean_std(&ok.iter().map(|r| get(r)).collect::<Vec<_>>());
    let (hs_mean, hs_std) = stat(|r| r.hs);
    let (ap_mean, ap_std) = stat(|r| r.ap);
    let (val_ap_mean, val_ap_std) = stat(|r| r.val_ap);
    let (iterations_mean, _) = stat(|r| r.iterations as f64);
    CellSummary {
        cell: runs[0].cell,
        runs: runs.len(),
        ok: ok.len(),
        hs_mean,
        hs_std,
        ap_mean,
        ap_std,
        val_ap_mean,
        val_ap_std,
        iterations_mean,
    }
}

/// Highest mean validation AP per variant; the first cell wins ties.
fn best_cells(cfg: &ExperimentConfig, summary: &[CellSummary]) -> Vec<usize> {
    cfg.variants
        .iter()
        .filter_map(|v| {
            let mut best: Option<usize> = None;
            for (i, s) in summary.iter().enumerate() {
                if s.cell.variant != v.0 || !s.val_ap_mean.is_finite() {
                    continue;
                }
                if best.is_none_or(|b| s.val_ap_mean > summary[b].val_ap_mean) {
                    best = Some(i);
                }
            }
            best
        })
        .collect()
}
