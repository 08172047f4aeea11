//! Single fits and scoring of stored predictions.

use std::path::Path;

use nail_core::{average_precision, fit, hamming_score, predict, EvalMask, FitTrace, Mask, Mat, ModelState, MultiViewDataset, SolverConfig, SolverError};

use crate::error::{NailError, Result};
use crate::io::{create_dir, write_file, write_matrix};

pub struct SingleFit {
    pub dataset: MultiViewDataset,
    pub state: ModelState,
    pub trace: FitTrace,
    pub scores: Mat,
    pub labels: Mat,
    /// Metrics on the hidden labels; `None` when nothing is hidden or no
    /// hidden column has a positive.
    pub hs: Option<f64>,
    pub ap: Option<f64>,
}

/// Fits `ds` (already masked) and scores its hidden labels.
pub fn fit_dataset(ds: MultiViewDataset, cfg: &SolverConfig, threshold: f64) -> Result<SingleFit> {
    let (state, trace) = fit(&ds, cfg).map_err(|e| match e {
        SolverError::Invalid(e) => NailError::Config(e.to_string()),
        e @ SolverError::Diverged { .. } => NailError::Diverged(e.to_string()),
    })?;
    let pred = predict(&state, threshold);
    let held_out = ds.eval_mask();
    let hs = hamming_score(&pred.labels, &held_out).ok();
    let ap = average_precision(&pred.scores, &held_out).ok();
    Ok(SingleFit { dataset: ds, state, trace, scores: pred.scores, labels: pred.labels, hs, ap })
}

/// Writes predictions, the embedding, the held-out truth and the trace.
///
/// `truth.csv` holds the ground truth of hidden entries and `NaN` elsewhere,
/// which is the format `eval` reads.
pub fn write_fit(result: &SingleFit, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_matrix(&dir.join("scores.csv"), &result.scores, None)?;
    write_matrix(&dir.join("predictions.csv"), &result.labels, None)?;
    write_matrix(&dir.join("embedding.csv"), &result.state.embedding, None)?;
    write_matrix(&dir.join("truth.csv"), result.dataset.truth(), Some(result.dataset.hidden_mask()))?;
    let m = result.state.n_views();
    let mut trace = String::from("iteration,total,reconstruction,label,hsic");
    for v in 0..m {
        trace.push_str(&format!(",alpha{}", v + 1));
    }
    trace.push('\n');
    for (it, (o, alpha)) in result.trace.objectives.iter().zip(&result.trace.alpha_history).enumerate() {
        trace.push_str(&format!("{},{},{},{},{}", it + 1, o.total, o.reconstruction, o.label, o.hsic));
        for a in alpha {
            trace.push_str(&format!(",{a}"));
        }
        trace.push('\n');
    }
    write_file(&dir.join("trace.csv"), trace.as_bytes())
}

/// Hamming score and AP of stored predictions on the non-`NaN` entries of
/// `truth`. Hard labels are `scores > threshold` unless given.
pub fn score_predictions(truth: &Mat, scores: &Mat, labels: Option<&Mat>, threshold: f64) -> Result<(f64, f64)> {
    for (name, m) in [("scores", Some(scores)), ("predictions", labels)] {
        if let Some(m) = m {
            if m.shape() != truth.shape() {
                return Err(NailError::Data(format!("{name} are {:?} but truth is {:?}", m.shape(), truth.shape())));
            }
        }
    }
    if let Some(x) = truth.as_slice().iter().find(|x| !x.is_nan() && **x != 0.0 && **x != 1.0) {
        return Err(NailError::Data(format!("truth entries must be 0, 1 or NaN, found {x}")));
    }
    let mask = Mask::from_fn(truth.rows(), truth.cols(), |i, j| !truth[(i, j)].is_nan());
    let eval = EvalMask { mask, truth: truth.map(|x| if x.is_nan() { 0.0 } else { x }) };
    let hard = match labels {
        Some(l) => l.clone(),
        None => scores.map(|p| if p > threshold { 1.0 } else { 0.0 }),
    };
    Ok((hamming_score(&hard, &eval)?, average_precision(scores, &eval)?))
}
