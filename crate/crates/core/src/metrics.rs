//! Hamming score and average precision on held-out label entries.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Mask, Mat};

/// Held-out entries and their ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalMask {
    pub mask: Mask,
    pub truth: Mat,
}

impl EvalMask {
    fn check(&self, m: &Mat) -> Result<()> {
        if m.shape() != self.mask.shape() || self.truth.shape() != self.mask.shape() {
            return Err(Error::Shape { context: "evaluation", expected: self.mask.shape(), found: m.shape() });
        }
        Ok(())
    }
}

/// Fraction of selected entries where `pred` equals the truth.
pub fn hamming_score(pred: &Mat, eval: &EvalMask) -> Result<f64> {
    eval.check(pred)?;
    let mut total = 0usize;
    let mut correct = 0usize;
    for (&p, (&t, &m)) in pred.as_slice().iter().zip(eval.truth.as_slice().iter().zip(eval.mask.as_slice())) {
        if m {
            total += 1;
            if p == t {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyEvalMask);
    }
    Ok(correct as f64 / total as f64)
}

/// Macro-averaged per-label average precision over held-out entries.
///
/// Within each label column the held-out entries are ranked by descending
/// score and precision is averaged over the positives' ranks. Tied scores
/// contribute the expected AP over a uniformly random order of the tie,
/// so the result does not depend on input order. Columns without a
/// held-out positive are skipped.
pub fn average_precision(scores: &Mat, eval: &EvalMask) -> Result<f64> {
    eval.check(scores)?;
    let (n, l) = scores.shape();
    let mut sum = 0.0;
    let mut qualifying = 0usize;
    let mut entries: Vec<(f64, bool)> = Vec::with_capacity(n);
    for j in 0..l {
        entries.clear();
        entries.extend((0..n).filter(|&i| eval.mask.get(i, j)).map(|i| (scores[(i, j)], eval.truth[(i, j)] == 1.0)));
        if let Some(ap) = column_ap(&mut entries) {
            sum += ap;
            qualifying += 1;
        }
    }
    if qualifying == 0 {
        return Err(Error::NoQualifyingColumn);
    }
    Ok(sum / qualifying as f64)
}

/// AP of one ranked list, `None` without positives.
fn column_ap(entries: &mut [(f64, bool)]) -> Option<f64> {
    let positives = entries.iter().filter(|e| e.1).count();
    if positives == 0 {
        return None;
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut acc = 0.0;
    let mut seen = 0usize;
    let mut seen_pos = 0usize;
    let mut start = 0;
    while start < entries.len() {
        let mut end = start + 1;
        while end < entries.len() && entries[end].0 == entries[start].0 {
            end += 1;
        }
        let t = end - start;
        let p = entries[start..end].iter().filter(|e| e.1).count();
        if p > 0 {
            // A positive at slot j of the tie has, on average,
            // (j−1)(p−1)/(t−1) other positives ahead of it.
            let mut expected = 0.0;
            for slot in 1..=t {
                let ahead = if t > 1 { (slot - 1) as f64 * (p - 1) as f64 / (t - 1) as f64 } else { 0.0 };
                expected += (seen_pos as f64 + 1.0 + ahead) / (seen + slot) as f64;
            }
            acc += p as f64 * expected / t as f64;
        }
        seen += t;
        seen_pos += p;
        start = end;
    }
    Some(acc / positives as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_all(truth: Mat) -> EvalMask {
        EvalMask { mask: Mask::full(truth.rows(), truth.cols()), truth }
    }

    #[test]
    fn hamming_examples() {
        let truth = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let eval = eval_all(truth.clone());
        assert_eq!(hamming_score(&truth, &eval).unwrap(), 1.0);
        assert_eq!(hamming_score(&truth.map(|x| 1.0 - x), &eval).unwrap(), 0.0);
        let mut pred = truth.clone();
        pred[(1, 1)] = 0.0;
        assert_eq!(hamming_score(&pred, &eval).unwrap(), 0.75);
        let empty = EvalMask { mask: Mask::empty(2, 2), truth };
        assert_eq!(hamming_score(&pred, &empty), Err(Error::EmptyEvalMask));
    }

    #[test]
    fn ap_examples() {
        let truth = Mat::from_rows(&[&[1.0], &[0.0], &[0.0]]).unwrap();
        let eval = eval_all(truth);
        let second = Mat::from_rows(&[&[0.5], &[0.9], &[0.1]]).unwrap();
        assert_eq!(average_precision(&second, &eval).unwrap(), 0.5);
        let first = Mat::from_rows(&[&[0.9], &[0.5], &[0.1]]).unwrap();
        assert_eq!(average_precision(&first, &eval).unwrap(), 1.0);
        let no_pos = eval_all(Mat::zeros(3, 1));
        assert_eq!(average_precision(&first, &no_pos), Err(Error::NoQualifyingColumn));
    }

    #[test]
    fn fully_tied_column_averages_orders() {
        // One positive among two tied entries: ranks 1 and 2 equally likely.
        let eval = eval_all(Mat::from_rows(&[&[1.0], &[0.0]]).unwrap());
        let ap = average_precision(&Mat::filled(2, 1, 0.3), &eval).unwrap();
        assert!((ap - 0.75).abs() < 1e-15);
    }
}
