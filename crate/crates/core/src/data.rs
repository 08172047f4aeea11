//! Multi-view dataset container, masking protocol, row splits and the
//! synthetic fixture generator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Mask, Mat};
use crate::losses::sigmoid;
use crate::metrics::EvalMask;
use crate::model::ModelState;
use crate::rng::{floor_fraction, seeded, stream};

const MAX_RESAMPLES: usize = 1000;

/// Views, labels and their observation masks for n samples.
///
/// Unobserved feature and label entries are stored as `0.0`, so arithmetic
/// on the raw matrices never sees a sentinel. Label entries hidden by
/// [`MultiViewDataset::apply_label_mask`] keep their value in a shadow
/// ground-truth matrix used only for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Mat>,
    feature_masks: Vec<Mask>,
    labels: Mat,
    label_mask: Mask,
    truth: Mat,
    hidden: Mask,
}

impl MultiViewDataset {
    /// Builds a dataset from explicit masks. Entries outside the masks are
    /// zeroed; observed entries must be finite and observed labels in {0, 1}.
    pub fn new(mut views: Vec<Mat>, feature_masks: Vec<Mask>, mut labels: Mat, label_mask: Mask) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidDataset("at least one view is required".into()));
        }
        if views.len() != feature_masks.len() {
            return Err(Error::InvalidDataset(format!(
                "{} views but {} feature masks",
                views.len(),
                feature_masks.len()
            )));
        }
        let n = views[0].rows();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        for (v, (x, o)) in views.iter_mut().zip(&feature_masks).enumerate() {
            if x.rows() != n {
                return Err(Error::InvalidDataset(format!("view {v} has {} rows, expected {n}", x.rows())));
            }
            if x.cols() == 0 {
                return Err(Error::InvalidDataset(format!("view {v} has no columns")));
            }
            if o.shape() != x.shape() {
                return Err(Error::Shape { context: "feature mask", expected: x.shape(), found: o.shape() });
            }
            for i in 0..n {
                for j in 0..x.cols() {
                    if !o.get(i, j) {
                        x[(i, j)] = 0.0;
                    } else if !x[(i, j)].is_finite() {
                        return Err(Error::InvalidDataset(format!("view {v} entry ({i}, {j}) is not finite")));
                    }
                }
            }
        }
        if labels.rows() != n {
            return Err(Error::InvalidDataset(format!("labels have {} rows, expected {n}", labels.rows())));
        }
        if label_mask.shape() != labels.shape() {
            return Err(Error::Shape { context: "label mask", expected: labels.shape(), found: label_mask.shape() });
        }
        for i in 0..n {
            for j in 0..labels.cols() {
                if !label_mask.get(i, j) {
                    labels[(i, j)] = 0.0;
                } else {
                    let y = labels[(i, j)];
                    if y != 0.0 && y != 1.0 {
                        return Err(Error::InvalidLabel { row: i, col: j, value: y });
                    }
                }
            }
        }
        for i in 0..n {
            if !feature_masks.iter().any(|o| o.row_any(i)) {
                return Err(Error::UncoveredRow { row: i });
            }
        }
        let hidden = Mask::empty(labels.rows(), labels.cols());
        let truth = labels.clone();
        Ok(Self { views, feature_masks, labels, label_mask, truth, hidden })
    }

    /// Builds a dataset whose masks are derived from `NaN` sentinels.
    pub fn from_sentinel(views: Vec<Mat>, labels: Mat) -> Result<Self> {
        let masks = views.iter().map(|x| Mask::from_fn(x.rows(), x.cols(), |i, j| !x[(i, j)].is_nan())).collect();
        let label_mask = Mask::from_fn(labels.rows(), labels.cols(), |i, j| !labels[(i, j)].is_nan());
        Self::new(views, masks, labels, label_mask)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.rows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.cols()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Mat::cols).collect()
    }

    pub fn views(&self) -> &[Mat] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Mat {
        &self.views[v]
    }

    pub fn feature_masks(&self) -> &[Mask] {
        &self.feature_masks
    }

    pub fn feature_mask(&self, v: usize) -> &Mask {
        &self.feature_masks[v]
    }

    /// Training labels; zero wherever `label_mask` is unset.
    pub fn labels(&self) -> &Mat {
        &self.labels
    }

    pub fn label_mask(&self) -> &Mask {
        &self.label_mask
    }

    /// Shadow ground truth, valid on observed and hidden entries.
    pub fn truth(&self) -> &Mat {
        &self.truth
    }

    /// Entries hidden by label masking.
    pub fn hidden_mask(&self) -> &Mask {
        &self.hidden
    }

    /// Held-out entries with their ground truth.
    pub fn eval_mask(&self) -> EvalMask {
        EvalMask { mask: self.hidden.clone(), truth: self.truth.clone() }
    }

    /// Every entry with known ground truth (observed or hidden).
    pub fn known_label_mask(&self) -> Mask {
        Mask::from_fn(self.labels.rows(), self.labels.cols(), |i, j| self.label_mask.get(i, j) || self.hidden.get(i, j))
    }

    /// Removes ⌊r·n⌋ whole sample rows from every view while keeping each
    /// sample present in at least one view.
    ///
    /// A row counts as present in view v if it has at least one observed
    /// entry there. Each view's removal set is resampled up to 1000 times
    /// when it would strand a sample; after that, stranded rows are swapped
    /// for the lowest-index rows that can be removed safely.
    pub fn apply_feature_mask(&self, spec: &MaskSpec) -> Result<Self> {
        spec.validate()?;
        let n = self.n_samples();
        let m = self.n_views();
        let count = floor_fraction(spec.feature_removal_rate, n);
        if count == 0 {
            return Ok(self.clone());
        }
        let available: Vec<Vec<bool>> = self.feature_masks.iter().map(|o| (0..n).map(|i| o.row_any(i)).collect()).collect();
        let mut removed = vec![vec![false; n]; m];
        let mut rng = seeded(spec.seed, stream::FEATURE_MASK);

        for v in 0..m {
            // Row i may leave view v only if some other view still holds it:
            // earlier views as already masked, later views as originally observed.
            let keeps_other_view = |i: usize, removed: &[Vec<bool>]| {
                (0..m).filter(|&w| w != v).any(|w| available[w][i] && !(w < v && removed[w][i]))
            };
            let mut chosen: Vec<usize> = Vec::new();
            let mut ok = false;
            for _ in 0..MAX_RESAMPLES {
                chosen = index::sample(&mut rng, n, count).into_vec();
                chosen.sort_unstable();
                if chosen.iter().all(|&i| keeps_other_view(i, &removed)) && later_views_feasible(&available, &removed, v, &chosen, count) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                let mut in_set = vec![false; n];
                for &i in &chosen {
                    in_set[i] = true;
                }
                let conflicting: Vec<usize> = chosen.iter().copied().filter(|&i| !keeps_other_view(i, &removed)).collect();
                for i in conflicting {
                    in_set[i] = false;
                    let replacement = (0..n).find(|&j| !in_set[j] && j != i && keeps_other_view(j, &removed));
                    match replacement {
                        // Rows already un-removed are never eligible (they conflict).
                        Some(j) => in_set[j] = true,
                        None => return Err(Error::CoverageUnsatisfiable { rate: spec.feature_removal_rate, view: v }),
                    }
                }
                chosen = (0..n).filter(|&i| in_set[i]).collect();
                if !later_views_feasible(&available, &removed, v, &chosen, count) {
                    return Err(Error::CoverageUnsatisfiable { rate: spec.feature_removal_rate, view: v });
                }
            }
            for i in chosen {
                removed[v][i] = true;
            }
        }

        let mut out = self.clone();
        for v in 0..m {
            for i in 0..n {
                if removed[v][i] {
                    out.feature_masks[v].set_row(i, false);
                    out.views[v].row_mut(i).fill(0.0);
                }
            }
        }
        Ok(out)
    }

    /// Hides ⌊s·P_j⌋ observed positives and ⌊s·N_j⌋ observed negatives in
    /// every label column j. Hidden values move to the shadow truth.
    pub fn apply_label_mask(&self, spec: &MaskSpec) -> Result<Self> {
        spec.validate()?;
        let mut out = self.clone();
        let mut rng = seeded(spec.seed, stream::LABEL_MASK);
        for j in 0..self.n_labels() {
            for class in [1.0, 0.0] {
                let members: Vec<usize> = (0..self.n_samples())
                    .filter(|&i| self.label_mask.get(i, j) && self.labels[(i, j)] == class)
                    .collect();
                let hide = floor_fraction(spec.label_removal_rate, members.len());
                for idx in index::sample(&mut rng, members.len(), hide) {
                    let i = members[idx];
                    out.label_mask.set(i, j, false);
                    out.hidden.set(i, j, true);
                    out.labels[(i, j)] = 0.0;
                }
            }
        }
        Ok(out)
    }

    /// Disjoint random partition into ⌊fraction·n⌋ and the remaining rows.
    pub fn split_rows(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let (train, rest) = split_indices(self.n_samples(), train_fraction, seed)?;
        Ok((self.select_rows(&train), self.select_rows(&rest)))
    }

    /// Random subset of `count` rows (all rows if `count >= n`).
    pub fn subsample(&self, count: usize, seed: u64) -> Self {
        let n = self.n_samples();
        if count >= n {
            return self.clone();
        }
        let mut rng = seeded(seed, stream::SUBSAMPLE);
        let mut rows = index::sample(&mut rng, n, count).into_vec();
        rows.sort_unstable();
        self.select_rows(&rows)
    }

    /// Dataset restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            views: self.views.iter().map(|x| x.select_rows(rows)).collect(),
            feature_masks: self.feature_masks.iter().map(|o| o.select_rows(rows)).collect(),
            labels: self.labels.select_rows(rows),
            label_mask: self.label_mask.select_rows(rows),
            truth: self.truth.select_rows(rows),
            hidden: self.hidden.select_rows(rows),
        }
    }

    /// Copy with every label hidden; used to score rows whose labels the
    /// model has never seen.
    pub fn with_all_labels_hidden(&self) -> Self {
        let mut out = self.clone();
        out.hidden = self.known_label_mask();
        out.label_mask = Mask::empty(self.labels.rows(), self.labels.cols());
        out.labels = Mat::zeros(self.labels.rows(), self.labels.cols());
        out
    }
}

/// Necessary condition, exact when every view observes every row, for the
/// views after `v` to each remove `count` rows once `v` removes `chosen`.
fn later_views_feasible(available: &[Vec<bool>], removed: &[Vec<bool>], v: usize, chosen: &[usize], count: usize) -> bool {
    let m = available.len();
    let later = m - v - 1;
    if later == 0 {
        return true;
    }
    let n = available[0].len();
    let mut leaving = vec![false; n];
    for &i in chosen {
        leaving[i] = true;
    }
    let mut capacity = vec![0usize; n];
    let mut total = 0;
    for i in 0..n {
        let earlier = (0..v).filter(|&w| available[w][i] && !removed[w][i]).count();
        let own = usize::from(available[v][i] && !leaving[i]);
        let future = (v + 1..m).filter(|&w| available[w][i]).count();
        capacity[i] = future.min((earlier + own + future).saturating_sub(1));
        total += capacity[i];
    }
    total >= later * count && (v + 1..m).all(|w| (0..n).filter(|&i| available[w][i] && capacity[i] > 0).count() >= count)
}

/// Row indices of a seeded random split, each side sorted ascending.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let n_train = floor_fraction(train_fraction, n);
    if n_train == 0 || n_train == n {
        return Err(Error::EmptySplit { fraction: train_fraction, n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(seed, stream::SPLIT));
    let mut train = perm[..n_train].to_vec();
    let mut rest = perm[n_train..].to_vec();
    train.sort_unstable();
    rest.sort_unstable();
    Ok((train, rest))
}

/// Removal rates for the masking protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskSpec {
    /// Fraction of sample rows removed from each view.
    pub feature_removal_rate: f64,
    /// Fraction of positives and of negatives hidden per label.
    pub label_removal_rate: f64,
    pub seed: u64,
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("feature", self.feature_removal_rate), ("label", self.label_removal_rate)] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!("{name} removal rate {r} must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Parameters of a planted low-rank multi-view fixture.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub n_labels: usize,
    pub k_true: usize,
    /// Column count of each view; the number of views is its length.
    pub view_dims: Vec<usize>,
    /// Gaussian noise standard deviation per view.
    pub noise_std: Vec<f64>,
    /// The last `noisy_view_count` views are replaced by pure noise.
    pub noisy_view_count: usize,
    pub positive_rate: f64,
    /// Approximate standard deviation of the planted logits within a label
    /// column.
    pub label_signal: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.view_dims.len();
        if m == 0 || self.n < 2 || self.n_labels == 0 || self.k_true == 0 {
            return Err(Error::InvalidParameter("synthetic spec needs n >= 2, at least one view, label and latent factor".into()));
        }
        if self.noise_std.len() != m {
            return Err(Error::InvalidParameter(format!("noise_std has {} entries for {m} views", self.noise_std.len())));
        }
        if self.noise_std.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("noise_std must be finite and nonnegative".into()));
        }
        let min_dim = *self.view_dims.iter().min().unwrap();
        if self.k_true >= min_dim {
            return Err(Error::InvalidParameter(format!("k_true {} must be below the smallest view dimension {min_dim}", self.k_true)));
        }
        if self.noisy_view_count > m {
            return Err(Error::InvalidParameter("more noisy views than views".into()));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::InvalidParameter(format!("positive rate {} must lie in (0, 1)", self.positive_rate)));
        }
        if !(self.label_signal >= 0.0 && self.label_signal.is_finite()) {
            return Err(Error::InvalidParameter("label_signal must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Ground truth behind a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedModel {
    pub state: ModelState,
    /// Logit offset added before sampling labels.
    pub label_offset: f64,
}

const POSITIVE_RATE_TOLERANCE: f64 = 0.02;

/// Generates a fully observed planted dataset.
///
/// Clean views are `F* U*^v + noise` with `F*`, `U*^v` uniform on [0, 1).
/// Noisy views are i.i.d. Gaussian with the mean and standard deviation the
/// clean signal would have had. Labels are Bernoulli draws with probability
/// `σ(F* U*^{m+1} + b)`, where `b` is bisected so the realized positive
/// rate lands within 0.02 of the target.
pub fn synthesize(spec: &SyntheticSpec) -> Result<(MultiViewDataset, PlantedModel)> {
    spec.validate()?;
    let mut rng = seeded(spec.seed, stream::SYNTH);
    let (n, k, l, m) = (spec.n, spec.k_true, spec.n_labels, spec.view_dims.len());
    let embedding = Mat::from_fn(n, k, |_, _| rng.gen::<f64>());

    let mut views = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m + 1);
    for (v, (&d, &noise)) in spec.view_dims.iter().zip(&spec.noise_std).enumerate() {
        let u = Mat::from_fn(k, d, |_, _| rng.gen::<f64>());
        let clean = embedding.matmul(&u);
        let x = if v >= m - spec.noisy_view_count {
            let values = clean.as_slice();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / values.len() as f64;
            let sd = libm::sqrt(var);
            Mat::from_fn(n, d, |_, _| mean + sd * gaussian(&mut rng))
        } else {
            Mat::from_fn(n, d, |i, j| clean[(i, j)] + noise * gaussian(&mut rng))
        };
        views.push(x);
        weights.push(u);
    }

    // Across rows f ~ U[0,1)^k, so Var(f·u) = ‖u‖² / 12 ≈ k σ² / 12.
    let sigma_u = spec.label_signal / libm::sqrt(k as f64 / 12.0);
    let label_weights = Mat::from_fn(k, l, |_, _| sigma_u * gaussian(&mut rng));
    let logits = embedding.matmul(&label_weights);
    let draws: Vec<f64> = (0..n * l).map(|_| rng.gen::<f64>()).collect();
    let realized = |b: f64| {
        let pos = logits.as_slice().iter().zip(&draws).filter(|(&z, &u)| u < sigmoid(z + b)).count();
        pos as f64 / (n * l) as f64
    };
    let (mut lo, mut hi) = (-100.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if realized(mid) < spec.positive_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever bracket end lands closer to the target.
    let offset = if (realized(lo) - spec.positive_rate).abs() <= (realized(hi) - spec.positive_rate).abs() { lo } else { hi };
    let achieved = realized(offset);
    if (achieved - spec.positive_rate).abs() > POSITIVE_RATE_TOLERANCE {
        return Err(Error::BisectionFailed { target: spec.positive_rate, achieved });
    }
    let labels = Mat::from_fn(n, l, |i, j| if draws[i * l + j] < sigmoid(logits[(i, j)] + offset) { 1.0 } else { 0.0 });
    weights.push(label_weights);

    let masks = views.iter().map(|x| Mask::full(x.rows(), x.cols())).collect();
    let dataset = MultiViewDataset::new(views, masks, labels, Mask::full(n, l))?;
    let state = ModelState {
        embedding,
        weights,
        view_weights: ModelState::uniform_view_weights(m),
        hsic_weights: ModelState::uniform_hsic_weights(m + 1),
    };
    Ok((dataset, PlantedModel { state, label_offset: offset }))
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
