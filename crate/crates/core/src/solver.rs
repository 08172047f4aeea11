//! Block-coordinate descent on the joint objective.
//!
//! One outer iteration freezes the kernel bandwidths, takes a few descent
//! steps on `F`, then on every `U^v` (views first, label block last),
//! tries an extrapolated point, and finally refreshes the closed-form view
//! weights α and HSIC weights β.
//!
//! A descent step builds a k×k curvature per row of `F` or per column of
//! `U^v` (reweighting for L2,1, local curvature for the label loss, a
//! diagonal estimate for HSIC), minimizes that model over the nonnegative
//! box, and backtracks along the segment until the Armijo condition holds
//! on the smoothed objective.
//!
//! [`fit`] seeds `F` and the view blocks with a short squared-loss
//! factorization of the views before the main loop.
//!
//! After the block updates the point `x + w (x − x_prev)` is evaluated and
//! kept only if it lowers the smoothed objective; `w` grows after a
//! success and shrinks after a failure.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::kernels::{gram_with, hsic_from_grams, hsic_gradient_against, GramMatrix, Kernel, KernelSpec};
use crate::descent::{
    add_diagonal, block_newton_step, column_hessians, entry_column_hessians, entry_row_hessians, masked_column_outer, BlockAxis, Step,
};
use crate::linalg::Mat;
use crate::losses::{
    objective, pairwise_hsic_from_grams, sigmoid, LabelLoss, LossConfig, ObjectiveBreakdown, ObjectiveSpec, ReconLoss,
};
use crate::model::ModelState;
use crate::rng::{seeded, stream};

const ALPHA_FLOOR: f64 = 1e-12;
const BETA_FALLBACK_NORM: f64 = 1e-12;
const CURVATURE_FLOOR: f64 = 1e-2;
const WARM_START_TOL: f64 = 1e-6;
const EXTRAPOLATION_START: f64 = 0.5;
const EXTRAPOLATION_GROWTH: f64 = 1.1;
const EXTRAPOLATION_DECAY: f64 = 1.5;

/// Model variants: the full method and its ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Gaussian-kernel HSIC.
    Nail,
    /// Linear-kernel HSIC.
    NailL,
    /// Squared Frobenius reconstruction and squared label error.
    Nail1,
    /// No HSIC penalty.
    Nail2,
    /// Uniform, frozen α and β.
    Nail3,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Nail, Variant::NailL, Variant::Nail1, Variant::Nail2, Variant::Nail3];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nail => "NAIL",
            Variant::NailL => "NAIL-L",
            Variant::Nail1 => "NAIL-1",
            Variant::Nail2 => "NAIL-2",
            Variant::Nail3 => "NAIL-3",
        }
    }

    fn adaptive_weights(self) -> bool {
        self != Variant::Nail3
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase().replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == upper)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoConfig {
    pub shrink: f64,
    pub slope: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self { shrink: 0.5, slope: 1e-4, max_backtracks: 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    /// Latent rank as a fraction of the smallest view dimension.
    pub latent_ratio: f64,
    /// HSIC kernel; `NAIL-L` and the ablations always use the linear kernel.
    pub kernel: KernelSpec,
    pub variant: Variant,
    /// Leave the label block unconstrained in sign.
    pub label_weights_signed: bool,
    pub max_outer: usize,
    /// Relative objective change that ends the outer loop.
    pub tol: f64,
    pub inner_steps: usize,
    /// Outer iterations of the squared-loss factorization that seeds `F`
    /// and the view blocks; 0 starts from the random draw.
    pub warm_start: usize,
    pub armijo: ArmijoConfig,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 0.1,
            latent_ratio: 0.5,
            kernel: KernelSpec::GAUSSIAN_AUTO,
            variant: Variant::Nail,
            label_weights_signed: true,
            max_outer: 500,
            tol: 1e-5,
            inner_steps: 5,
            warm_start: 200,
            armijo: ArmijoConfig::default(),
            seed: 0,
            loss: LossConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(String::from(msg)));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("lambda and mu must be finite and nonnegative");
        }
        if !(self.latent_ratio > 0.0 && self.latent_ratio <= 1.0) {
            return bad("latent ratio must lie in (0, 1]");
        }
        if self.max_outer == 0 || self.inner_steps == 0 || !(self.tol > 0.0) {
            return bad("max_outer, inner_steps and tol must be positive");
        }
        let a = &self.armijo;
        if !(a.shrink > 0.0 && a.shrink < 1.0) || !(a.slope > 0.0 && a.slope < 1.0) {
            return bad("armijo shrink and slope must lie in (0, 1)");
        }
        self.loss.validate()
    }

    /// `max(1, ⌊r_k · min_v d_v⌋)`.
    pub fn rank_for(&self, view_dims: &[usize]) -> usize {
        let min_d = view_dims.iter().copied().min().unwrap_or(1);
        crate::rng::floor_fraction(self.latent_ratio, min_d).max(1)
    }

    /// Objective actually optimized by the configured variant.
    pub fn objective_spec(&self) -> ObjectiveSpec {
        let mut spec = ObjectiveSpec::standard(self.lambda, self.mu, &self.loss);
        match self.variant {
            Variant::Nail1 => {
                spec.recon = ReconLoss::SquaredFrobenius;
                spec.label = LabelLoss::SquaredError;
            }
            Variant::Nail2 => spec.mu = 0.0,
            _ => {}
        }
        spec
    }

    /// Kernel used by the variant: Gaussian only for the full method.
    pub fn effective_kernel(&self) -> KernelSpec {
        match self.variant {
            Variant::Nail => self.kernel,
            _ => KernelSpec::LINEAR,
        }
    }
}

/// Per-outer-iteration record of a fit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    /// Exact objective after each outer iteration.
    pub objectives: Vec<ObjectiveBreakdown>,
    pub alpha_history: Vec<Vec<f64>>,
    pub beta_history: Vec<Mat>,
    /// Smoothed objective (fixed α, β, bandwidths, smoothing) at the start
    /// of each iteration, after the `F` update, after each `U^v` update and,
    /// when it was accepted, after the extrapolation.
    pub substep_objectives: Vec<Vec<f64>>,
    /// Gradient steps whose line search ran out of backtracks.
    pub line_search_failures: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverError {
    Invalid(Error),
    /// The objective became non-finite.
    Diverged { iteration: usize, trace: FitTrace },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Invalid(e) => write!(f, "{e}"),
            SolverError::Diverged { iteration, .. } => write!(f, "objective became non-finite at outer iteration {iteration}"),
        }
    }
}

impl core::error::Error for SolverError {}

impl From<Error> for SolverError {
    fn from(e: Error) -> Self {
        SolverError::Invalid(e)
    }
}

/// Random nonnegative starting point.
///
/// Entries of `F` and `U^v` are uniform on `[0, c)` with
/// `c = √(mean observed |X| / k)` (per view for `U^v`, pooled for `F`);
/// the label block uses `c = √(0.5 / k)`.
pub fn init_state(ds: &MultiViewDataset, cfg: &SolverConfig) -> ModelState {
    let k = cfg.rank_for(&ds.view_dims());
    let m = ds.n_views();
    let mut rng = seeded(cfg.seed, stream::INIT);
    let mut pooled = (0.0, 0usize);
    let scales: Vec<f64> = (0..m)
        .map(|v| {
            let (sum, count) = observed_abs(ds, v);
            pooled.0 += sum;
            pooled.1 += count;
            scale_for(sum, count, k)
        })
        .collect();
    let f_scale = scale_for(pooled.0, pooled.1, k);
    let embedding = Mat::from_fn(ds.n_samples(), k, |_, _| f_scale * rng.gen::<f64>());
    let mut weights: Vec<Mat> = (0..m).map(|v| Mat::from_fn(k, ds.view(v).cols(), |_, _| scales[v] * rng.gen::<f64>())).collect();
    let label_scale = libm::sqrt(0.5 / k as f64);
    weights.push(Mat::from_fn(k, ds.n_labels(), |_, _| label_scale * rng.gen::<f64>()));
    ModelState {
        embedding,
        weights,
        view_weights: ModelState::uniform_view_weights(m),
        hsic_weights: ModelState::uniform_hsic_weights(m + 1),
    }
}

fn observed_abs(ds: &MultiViewDataset, v: usize) -> (f64, usize) {
    let o = ds.feature_mask(v);
    let x = ds.view(v);
    let mut sum = 0.0;
    for (value, &m) in x.as_slice().iter().zip(o.as_slice()) {
        if m {
            sum += value.abs();
        }
    }
    (sum, o.count())
}

fn scale_for(sum: f64, count: usize, k: usize) -> f64 {
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let c = libm::sqrt(mean / k as f64);
    if c > 0.0 && c.is_finite() {
        c
    } else {
        // All observed entries are zero; any small positive scale works.
        libm::sqrt(0.5 / k as f64)
    }
}

/// Closed-form view weights `α_v ∝ e_v^{1/(s−1)}` on the simplex.
pub fn update_alpha(errors: &[f64], s: f64) -> Vec<f64> {
    if errors.is_empty() {
        return Vec::new();
    }
    let exponent = 1.0 / (s - 1.0);
    let logs: Vec<f64> = errors.iter().map(|&e| exponent * libm::log(e.max(ALPHA_FLOOR))).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|&x| libm::exp(x - max)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Row-normalized HSIC weights: `β_{vv'} = h_{vv'} / ‖h_{v,·}‖₂`, with the
/// uniform fallback when a row of `h` is numerically zero.
pub fn update_beta(h: &Mat) -> Mat {
    let b = h.rows();
    let uniform = ModelState::uniform_hsic_weights(b);
    let mut beta = Mat::zeros(b, b);
    for v in 0..b {
        let norm = libm::sqrt((0..b).filter(|&w| w != v).map(|w| h[(v, w)] * h[(v, w)]).sum::<f64>());
        for w in 0..b {
            if w == v {
                continue;
            }
            beta[(v, w)] = if norm < BETA_FALLBACK_NORM { uniform[(v, w)] } else { h[(v, w)].max(0.0) / norm };
        }
    }
    beta
}

/// Label scores `σ(F U^{m+1})` and their thresholded labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Mat,
    pub labels: Mat,
}

/// Scores and binary labels; an entry is positive iff its score exceeds
/// `threshold` strictly.
pub fn predict(state: &ModelState, threshold: f64) -> Prediction {
    predict_from_embedding(&state.embedding, state, threshold)
}

/// Like [`predict`] but for an embedding of other rows (see [`embed_rows`]).
pub fn predict_from_embedding(embedding: &Mat, state: &ModelState, threshold: f64) -> Prediction {
    let scores = embedding.matmul(state.label_weights()).map(sigmoid);
    let labels = scores.map(|p| if p > threshold { 1.0 } else { 0.0 });
    Prediction { scores, labels }
}

/// Outcome of one block update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockReport {
    pub before: f64,
    pub after: f64,
    pub failures: usize,
}

/// A dataset, configuration and bandwidths frozen for one outer iteration.
pub struct Problem<'a> {
    ds: &'a MultiViewDataset,
    cfg: &'a SolverConfig,
    spec: ObjectiveSpec,
    kernels: Vec<Kernel>,
    label_curvature: f64,
}

impl<'a> Problem<'a> {
    /// Freezes kernels for the current weight matrices.
    pub fn new(ds: &'a MultiViewDataset, cfg: &'a SolverConfig, state: &ModelState) -> Result<Self> {
        let spec = cfg.objective_spec();
        let kernel = cfg.effective_kernel();
        let kernels = if state.rank() >= 2 {
            state.weights.iter().map(|u| kernel.resolve(u)).collect::<Result<Vec<_>>>()?
        } else {
            // HSIC needs two latent rows; with k = 1 the penalty is zero.
            vec![Kernel::Linear; state.weights.len()]
        };
        let label_curvature = spec.label.curvature_bound();
        Ok(Self { ds, cfg, spec, kernels, label_curvature })
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    fn hsic_active(&self, state: &ModelState) -> bool {
        self.spec.mu != 0.0 && state.rank() >= 2
    }

    fn view_factor(&self, state: &ModelState, v: usize) -> f64 {
        libm::pow(state.view_weights[v], self.spec.view_exponent)
    }

    /// Smoothed objective with α, β and bandwidths as currently frozen.
    pub fn smoothed_total(&self, state: &ModelState) -> f64 {
        let mut total = self.embedding_terms(state, &state.embedding);
        if self.hsic_active(state) {
            let grams = self.grams(state);
            let h = pairwise_hsic_from_grams(&grams).expect("grams share the latent dimension");
            total += self.spec.mu * h.dot(&state.hsic_weights);
        }
        total
    }

    /// Exact objective (unsmoothed L2,1).
    pub fn objective(&self, state: &ModelState) -> Result<ObjectiveBreakdown> {
        objective(state, self.ds, &self.spec, &self.kernels)
    }

    fn grams(&self, state: &ModelState) -> Vec<GramMatrix> {
        state.weights.iter().zip(&self.kernels).map(|(u, &k)| gram_with(u, k)).collect()
    }

    /// Terms depending on `F`: α-weighted reconstruction plus λ·label.
    fn embedding_terms(&self, state: &ModelState, f: &Mat) -> f64 {
        let mut total = 0.0;
        for v in 0..self.ds.n_views() {
            total += self.view_factor(state, v) * self.recon_smoothed(f, &state.weights[v], v);
        }
        if self.spec.lambda != 0.0 {
            total += self.spec.lambda * self.spec.label.total(&f.matmul(state.label_weights()), self.ds.labels(), self.ds.label_mask());
        }
        total
    }

    fn recon_smoothed(&self, f: &Mat, u: &Mat, v: usize) -> f64 {
        let r = self.ds.view(v).sub(&f.matmul(u));
        self.spec.recon.smoothed(&r, self.ds.feature_mask(v))
    }

    /// Descent steps on `F` (see the module docs); other blocks fixed.
    pub fn update_embedding(&self, state: &mut ModelState) -> BlockReport {
        let before = self.embedding_terms(state, &state.embedding);
        let mut current = before;
        let mut failures = 0;
        for _ in 0..self.cfg.inner_steps {
            let f = &state.embedding;
            let (grad, hessians) = self.embedding_model(state, f);
            let step = block_newton_step(f, &grad, &hessians, BlockAxis::Rows, true, current, &self.cfg.armijo, |cand| {
                self.embedding_terms(state, cand)
            });
            match step {
                Step::Accepted(next, value) => {
                    state.embedding = next;
                    current = value;
                }
                Step::Stationary => break,
                Step::Failed => failures += 1,
            }
        }
        BlockReport { before, after: current, failures }
    }

    /// Gradient and per-row majorizer curvature of the `F` terms.
    fn embedding_model(&self, state: &ModelState, f: &Mat) -> (Mat, Vec<Mat>) {
        let (n, k) = f.shape();
        let mut grad = Mat::zeros(n, k);
        let mut hessians = vec![Mat::zeros(k, k); n];
        for v in 0..self.ds.n_views() {
            let u = &state.weights[v];
            let o = self.ds.feature_mask(v);
            let r = self.ds.view(v).sub(&f.matmul(u));
            let factor = self.view_factor(state, v);
            grad.axpy(-factor, &self.spec.recon.residual_grad(&r, o).matmul_t(u));
            let full = u.matmul_t(u);
            for (i, w) in self.spec.recon.row_curvature(&r, o).into_iter().enumerate() {
                hessians[i].axpy(factor * w, &masked_column_outer(u, o.row(i), &full));
            }
        }
        if self.spec.lambda != 0.0 {
            let ul = state.label_weights();
            let z = f.matmul(ul);
            let dz = self.spec.label.logit_grad(&z, self.ds.labels(), self.ds.label_mask());
            grad.axpy(self.spec.lambda, &dz.matmul_t(ul));
            let mut w = self.spec.label.local_curvature(&z, self.ds.labels(), self.ds.label_mask(), self.curvature_floor());
            w.scale(self.spec.lambda);
            for (h, l) in hessians.iter_mut().zip(entry_row_hessians(ul, &w)) {
                h.axpy(1.0, &l);
            }
        }
        for h in &mut hessians {
            regularize(h);
        }
        (grad, hessians)
    }

    /// Lower bound on the per-entry label curvature used in block models.
    fn curvature_floor(&self) -> f64 {
        CURVATURE_FLOOR * self.label_curvature
    }

    /// Descent steps on `U^v`; `v == m` is the label block.
    pub fn update_weights(&self, state: &mut ModelState, v: usize) -> BlockReport {
        let m = self.ds.n_views();
        assert!(v <= m, "weight block {v} out of range");
        let others: Vec<(f64, GramMatrix)> = if self.hsic_active(state) {
            (0..=m)
                .filter(|&w| w != v)
                .map(|w| {
                    let coupling = state.hsic_weights[(v, w)] + state.hsic_weights[(w, v)];
                    (coupling, gram_with(&state.weights[w], self.kernels[w]))
                })
                .filter(|(c, _)| *c != 0.0)
                .collect()
        } else {
            Vec::new()
        };
        let kernel = self.kernels[v];
        let mu = self.spec.mu;
        let f = &state.embedding;
        let factor = if v < m { self.view_factor(state, v) } else { self.spec.lambda };
        let slice = |u: &Mat| -> f64 {
            let data = if v < m {
                factor * self.recon_smoothed(f, u, v)
            } else if factor != 0.0 {
                factor * self.spec.label.total(&f.matmul(u), self.ds.labels(), self.ds.label_mask())
            } else {
                0.0
            };
            if others.is_empty() {
                return data;
            }
            let gram = gram_with(u, kernel);
            data + mu * others.iter().map(|(c, g)| c * hsic_from_grams(&gram, g).unwrap_or(0.0)).sum::<f64>()
        };
        let project = v < m || !self.cfg.label_weights_signed;
        let hsic_curvature: f64 = others.iter().map(|(c, g)| mu * c * hsic_curvature_estimate(g, kernel)).sum();

        let mut u = state.weights[v].clone();
        let before = slice(&u);
        let mut current = before;
        let mut failures = 0;
        let (k, d) = u.shape();
        for _ in 0..self.cfg.inner_steps {
            let mut grad = Mat::zeros(k, d);
            let mut hessians = if factor != 0.0 {
                let (g, mut hs) = if v < m {
                    let o = self.ds.feature_mask(v);
                    let r = self.ds.view(v).sub(&f.matmul(&u));
                    let mut g = f.t_matmul(&self.spec.recon.residual_grad(&r, o));
                    g.scale(-factor);
                    (g, column_hessians(f, &self.spec.recon.row_curvature(&r, o), o))
                } else {
                    let (y, o) = (self.ds.labels(), self.ds.label_mask());
                    let z = f.matmul(&u);
                    let mut g = f.t_matmul(&self.spec.label.logit_grad(&z, y, o));
                    g.scale(factor);
                    let w = self.spec.label.local_curvature(&z, y, o, self.curvature_floor());
                    (g, entry_column_hessians(f, &w))
                };
                grad.axpy(1.0, &g);
                for h in &mut hs {
                    h.scale(factor);
                }
                hs
            } else {
                vec![Mat::zeros(k, k); d]
            };
            for (c, g) in &others {
                grad.axpy(mu * c, &hsic_gradient_against(&u, kernel, g));
            }
            for h in &mut hessians {
                add_diagonal(h, hsic_curvature);
                regularize(h);
            }
            match block_newton_step(&u, &grad, &hessians, BlockAxis::Cols, project, current, &self.cfg.armijo, &slice) {
                Step::Accepted(next, value) => {
                    u = next;
                    current = value;
                }
                Step::Stationary => break,
                Step::Failed => failures += 1,
            }
        }
        state.weights[v] = u;
        BlockReport { before, after: current, failures }
    }

    /// Per-view reconstruction errors under the variant's exact measure.
    pub fn view_errors(&self, state: &ModelState) -> Vec<f64> {
        (0..self.ds.n_views())
            .map(|v| {
                let r = self.ds.view(v).sub(&state.embedding.matmul(&state.weights[v]));
                self.spec.recon.value(&r, self.ds.feature_mask(v))
            })
            .collect()
    }

    /// Pairwise HSIC among all weight matrices under the frozen kernels.
    pub fn pairwise_hsic(&self, state: &ModelState) -> Mat {
        if state.rank() < 2 {
            return Mat::zeros(state.weights.len(), state.weights.len());
        }
        pairwise_hsic_from_grams(&self.grams(state)).expect("grams share the latent dimension")
    }
}

/// Rough curvature scale of `hsic(·, other)`: twice the norm of the
/// centered, normalized Gram it is paired with, times 2/σ² for Gaussians.
fn hsic_curvature_estimate(other: &GramMatrix, kernel: Kernel) -> f64 {
    let k = other.0.rows();
    let norm = ((k - 1) * (k - 1)) as f64;
    let g = libm::sqrt(other.centered().frobenius_sq()) / norm;
    match kernel {
        Kernel::Linear => 2.0 * g,
        Kernel::Gaussian { sigma } => 2.0 * g * 2.0 / (sigma * sigma),
    }
}

/// Tiny ridge so every block model is strictly convex.
fn regularize(h: &mut Mat) {
    let scale = h.trace() / h.rows().max(1) as f64;
    add_diagonal(h, 1e-10 * scale + 1e-12);
}

/// Runs block-coordinate descent from [`init_state`] until the relative
/// objective change drops below `tol` or `max_outer` iterations pass.
pub fn fit(ds: &MultiViewDataset, cfg: &SolverConfig) -> core::result::Result<(ModelState, FitTrace), SolverError> {
    cfg.validate()?;
    let state = init_state(ds, cfg);
    let state = warm_start(ds, cfg, state)?;
    fit_from(ds, cfg, state)
}

/// Fits `F` and the view blocks of `state` to the views alone under the
/// squared loss with uniform view weights, for `cfg.warm_start` outer
/// iterations at most. The label block, α and β are returned unchanged.
pub fn warm_start(ds: &MultiViewDataset, cfg: &SolverConfig, state: ModelState) -> core::result::Result<ModelState, SolverError> {
    if cfg.warm_start == 0 {
        return Ok(state);
    }
    let warm = SolverConfig {
        lambda: 0.0,
        mu: 0.0,
        variant: Variant::Nail1,
        max_outer: cfg.warm_start,
        tol: WARM_START_TOL,
        warm_start: 0,
        ..cfg.clone()
    };
    let (fitted, _) = descend(ds, &warm, state.clone(), false)?;
    let m = ds.n_views();
    let mut weights = fitted.weights;
    weights[m] = state.weights[m].clone();
    Ok(ModelState { embedding: fitted.embedding, weights, ..state })
}

/// [`fit`] from a given starting state.
pub fn fit_from(ds: &MultiViewDataset, cfg: &SolverConfig, state: ModelState) -> core::result::Result<(ModelState, FitTrace), SolverError> {
    descend(ds, cfg, state, cfg.variant.adaptive_weights())
}

fn descend(
    ds: &MultiViewDataset,
    cfg: &SolverConfig,
    mut state: ModelState,
    adaptive: bool,
) -> core::result::Result<(ModelState, FitTrace), SolverError> {
    cfg.validate()?;
    let m = ds.n_views();
    let mut trace = FitTrace::default();
    if !adaptive {
        state.view_weights = ModelState::uniform_view_weights(m);
        state.hsic_weights = ModelState::uniform_hsic_weights(m + 1);
    }
    let s = cfg.loss.view_exponent;

    let mut previous: Option<(Mat, Vec<Mat>)> = None;
    let mut weight = EXTRAPOLATION_START;
    for iteration in 0..cfg.max_outer {
        let problem = Problem::new(ds, cfg, &state)?;
        let mut substeps = Vec::with_capacity(m + 3);
        substeps.push(problem.smoothed_total(&state));
        let report = problem.update_embedding(&mut state);
        trace.line_search_failures += report.failures;
        substeps.push(problem.smoothed_total(&state));
        for v in 0..=m {
            let report = problem.update_weights(&mut state, v);
            trace.line_search_failures += report.failures;
            substeps.push(problem.smoothed_total(&state));
        }
        let blocks = (state.embedding.clone(), state.weights.clone());
        if let Some((f_prev, u_prev)) = previous.take() {
            let candidate = extrapolate(&state, &f_prev, &u_prev, weight, cfg.label_weights_signed);
            let value = problem.smoothed_total(&candidate);
            if value < *substeps.last().unwrap_or(&f64::INFINITY) {
                state = candidate;
                substeps.push(value);
                weight = (weight * EXTRAPOLATION_GROWTH).min(1.0);
            } else {
                weight /= EXTRAPOLATION_DECAY;
            }
        }
        previous = Some(blocks);
        if adaptive {
            state.view_weights = update_alpha(&problem.view_errors(&state), s);
            state.hsic_weights = update_beta(&problem.pairwise_hsic(&state));
        }
        let breakdown = problem.objective(&state)?;
        trace.substep_objectives.push(substeps);
        trace.alpha_history.push(state.view_weights.clone());
        trace.beta_history.push(state.hsic_weights.clone());
        trace.objectives.push(breakdown);
        trace.iterations = iteration + 1;
        if !breakdown.total.is_finite() || substeps_last_nonfinite(&trace) {
            return Err(SolverError::Diverged { iteration, trace });
        }
        if trace.objectives.len() >= 2 {
            let prev = trace.objectives[trace.objectives.len() - 2].total;
            if (breakdown.total - prev).abs() / prev.max(1e-12) < cfg.tol {
                trace.converged = true;
                break;
            }
        }
    }
    Ok((state, trace))
}

/// `x + w (x − x_prev)` on every block, projected onto the feasible set.
fn extrapolate(state: &ModelState, f_prev: &Mat, u_prev: &[Mat], w: f64, label_signed: bool) -> ModelState {
    let push = |x: &Mat, prev: &Mat, project: bool| {
        let mut out = x.clone();
        out.axpy(w, &x.sub(prev));
        if project {
            out.map(|a| a.max(0.0))
        } else {
            out
        }
    };
    let last = u_prev.len() - 1;
    let mut next = state.clone();
    next.embedding = push(&state.embedding, f_prev, true);
    for (v, (u, p)) in state.weights.iter().zip(u_prev).enumerate() {
        next.weights[v] = push(u, p, v < last || !label_signed);
    }
    next
}

fn substeps_last_nonfinite(trace: &FitTrace) -> bool {
    trace.substep_objectives.last().is_some_and(|s| s.iter().any(|x| !x.is_finite()))
}

/// Embeds unseen rows against fixed weight matrices by projected gradient
/// descent on the α-weighted reconstruction alone (their labels are not
/// used). Returns the new n×k embedding.
pub fn embed_rows(state: &ModelState, ds: &MultiViewDataset, cfg: &SolverConfig, steps: usize) -> Result<Mat> {
    let m = ds.n_views();
    if m != state.n_views() || ds.view_dims().iter().zip(&state.weights).any(|(&d, u)| u.cols() != d) {
        return Err(Error::Shape { context: "embed_rows", expected: (m, state.rank()), found: (ds.n_views(), 0) });
    }
    let spec = cfg.objective_spec();
    let k = state.rank();
    let n = ds.n_samples();
    let factors: Vec<f64> = state.view_weights.iter().map(|a| libm::pow(*a, spec.view_exponent)).collect();
    let value = |f: &Mat| -> f64 {
        (0..m).map(|v| factors[v] * spec.recon.smoothed(&ds.view(v).sub(&f.matmul(&state.weights[v])), ds.feature_mask(v))).sum()
    };
    let fulls: Vec<Mat> = state.weights[..m].iter().map(|u| u.matmul_t(u)).collect();
    let mut pooled = (0.0, 0usize);
    for v in 0..m {
        let (s, c) = observed_abs(ds, v);
        pooled.0 += s;
        pooled.1 += c;
    }
    let mut f = Mat::filled(n, k, 0.5 * scale_for(pooled.0, pooled.1, k));
    let mut current = value(&f);
    for _ in 0..steps {
        let mut grad = Mat::zeros(n, k);
        let mut hessians = vec![Mat::zeros(k, k); n];
        for v in 0..m {
            let o = ds.feature_mask(v);
            let u = &state.weights[v];
            let r = ds.view(v).sub(&f.matmul(u));
            grad.axpy(-factors[v], &spec.recon.residual_grad(&r, o).matmul_t(u));
            for (i, w) in spec.recon.row_curvature(&r, o).into_iter().enumerate() {
                hessians[i].axpy(factors[v] * w, &masked_column_outer(u, o.row(i), &fulls[v]));
            }
        }
        for h in &mut hessians {
            regularize(h);
        }
        match block_newton_step(&f, &grad, &hessians, BlockAxis::Rows, true, current, &cfg.armijo, value) {
            Step::Accepted(next, v) => {
                f = next;
                current = v;
            }
            Step::Stationary | Step::Failed => break,
        }
    }
    Ok(f)
}
