//! Objective terms: masked L2,1 reconstruction, focal label loss and the
//! β-weighted HSIC penalty, with analytic gradients.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{gram_with, hsic_from_grams, GramMatrix, Kernel};
use crate::linalg::{Mask, Mat};
use crate::model::ModelState;
use crate::data::MultiViewDataset;

/// Constants of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Focusing exponent γ.
    pub gamma: f64,
    /// Positive-class weight a; negatives get 1 − a.
    pub balance: f64,
    /// View-weight exponent s.
    pub view_exponent: f64,
    /// Smoothing of the row norms in L2,1.
    pub eps_l21: f64,
    /// Probability clamp before taking logs.
    pub eps_prob: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { gamma: 2.0, balance: 0.5, view_exponent: 0.5, eps_l21: 1e-8, eps_prob: 1e-12 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma >= 0.0
            && (0.0..=1.0).contains(&self.balance)
            && self.view_exponent > 0.0
            && self.view_exponent < 1.0
            && self.eps_l21 > 0.0
            && self.eps_prob > 0.0
            && self.eps_prob < 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(alloc::format!("invalid loss config {self:?}")))
        }
    }
}

/// Term values of the full objective.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveBreakdown {
    /// α^s-weighted reconstruction.
    pub reconstruction: f64,
    /// λ-weighted label term.
    pub label: f64,
    /// μ-weighted HSIC penalty.
    pub hsic: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn new(reconstruction: f64, label: f64, hsic: f64) -> Self {
        Self { reconstruction, label, hsic, total: reconstruction + label + hsic }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn check_same(context: &'static str, r: &Mat, o: &Mask) -> Result<()> {
    if r.shape() != o.shape() {
        return Err(Error::Shape { context, expected: r.shape(), found: o.shape() });
    }
    Ok(())
}

fn masked_row_sq(r: &Mat, o: &Mask, i: usize) -> f64 {
    r.row(i).iter().zip(o.row(i)).filter(|(_, &m)| m).map(|(x, _)| x * x).sum()
}

/// `Σ_i ‖(O ⊙ R)_{i:}‖₂`.
pub fn masked_l21(r: &Mat, o: &Mask) -> Result<f64> {
    check_same("masked_l21", r, o)?;
    Ok((0..r.rows()).map(|i| libm::sqrt(masked_row_sq(r, o, i))).sum())
}

/// Smoothed surrogate `Σ_i √(‖(O ⊙ R)_{i:}‖² + ε²)`.
pub fn smoothed_l21(r: &Mat, o: &Mask, eps: f64) -> Result<f64> {
    check_same("smoothed_l21", r, o)?;
    Ok((0..r.rows()).map(|i| libm::sqrt(masked_row_sq(r, o, i) + eps * eps)).sum())
}

/// Gradient of [`smoothed_l21`] with respect to `R`: each masked row divided
/// by its smoothed norm, zero on masked-out entries.
pub fn l21_grad(r: &Mat, o: &Mask, eps: f64) -> Result<Mat> {
    check_same("l21_grad", r, o)?;
    let mut g = Mat::zeros(r.rows(), r.cols());
    for i in 0..r.rows() {
        let inv = 1.0 / libm::sqrt(masked_row_sq(r, o, i) + eps * eps);
        for ((gij, &rij), &m) in g.row_mut(i).iter_mut().zip(r.row(i)).zip(o.row(i)) {
            if m {
                *gij = rij * inv;
            }
        }
    }
    Ok(g)
}

/// `−a_ij (1 − q)^γ log q` with `q = p` for positives and `1 − p` otherwise.
pub fn focal_loss(y: f64, p: f64, cfg: &LossConfig) -> f64 {
    let p = p.clamp(cfg.eps_prob, 1.0 - cfg.eps_prob);
    let (q, weight) = if y == 1.0 { (p, cfg.balance) } else { (1.0 - p, 1.0 - cfg.balance) };
    -weight * libm::pow(1.0 - q, cfg.gamma) * libm::log(q)
}

/// d focal / d z for `p = σ(z)`.
///
/// With dq/dz = ±q(1 − q) the chain rule collapses to
/// `±a_ij [γ (1 − q)^γ q log q − (1 − q)^{γ+1}]`, which stays finite for
/// every γ ≥ 0.
pub fn focal_dz(y: f64, z: f64, cfg: &LossConfig) -> f64 {
    let p = sigmoid(z).clamp(cfg.eps_prob, 1.0 - cfg.eps_prob);
    let (q, weight, sign) = if y == 1.0 { (p, cfg.balance, 1.0) } else { (1.0 - p, 1.0 - cfg.balance, -1.0) };
    let one_minus = 1.0 - q;
    let pow_g = libm::pow(one_minus, cfg.gamma);
    sign * weight * (cfg.gamma * pow_g * q * libm::log(q) - pow_g * one_minus)
}

fn check_label_shapes(f: &Mat, u: &Mat, y: &Mat, o: &Mask) -> Result<()> {
    if f.cols() != u.rows() {
        return Err(Error::Shape { context: "label term", expected: (f.cols(), u.cols()), found: u.shape() });
    }
    let expected = (f.rows(), u.cols());
    if y.shape() != expected {
        return Err(Error::Shape { context: "label term", expected, found: y.shape() });
    }
    if o.shape() != expected {
        return Err(Error::Shape { context: "label term", expected, found: o.shape() });
    }
    Ok(())
}

/// Focal loss summed over observed entries of `σ(F U)`.
pub fn label_term(f: &Mat, u: &Mat, y: &Mat, o: &Mask, cfg: &LossConfig) -> Result<f64> {
    check_label_shapes(f, u, y, o)?;
    Ok(LabelLoss::Focal(*cfg).total(&f.matmul(u), y, o))
}

/// Gradients of [`label_term`] with respect to `F` and `U`.
pub fn label_term_grads(f: &Mat, u: &Mat, y: &Mat, o: &Mask, cfg: &LossConfig) -> Result<(Mat, Mat)> {
    check_label_shapes(f, u, y, o)?;
    let dz = LabelLoss::Focal(*cfg).logit_grad(&f.matmul(u), y, o);
    Ok((dz.matmul_t(u), f.t_matmul(&dz)))
}

/// Reconstruction measure for feature views.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReconLoss {
    /// Masked L2,1 norm, optimized through its ε-smoothed surrogate.
    L21 { eps: f64 },
    /// Masked squared Frobenius norm.
    SquaredFrobenius,
}

impl ReconLoss {
    /// Exact value on residual `R`.
    pub fn value(&self, r: &Mat, o: &Mask) -> f64 {
        match self {
            ReconLoss::L21 { .. } => (0..r.rows()).map(|i| libm::sqrt(masked_row_sq(r, o, i))).sum(),
            ReconLoss::SquaredFrobenius => (0..r.rows()).map(|i| masked_row_sq(r, o, i)).sum(),
        }
    }

    /// Value of the surrogate the solver descends on.
    pub fn smoothed(&self, r: &Mat, o: &Mask) -> f64 {
        match self {
            ReconLoss::L21 { eps } => (0..r.rows()).map(|i| libm::sqrt(masked_row_sq(r, o, i) + eps * eps)).sum(),
            ReconLoss::SquaredFrobenius => self.value(r, o),
        }
    }

    /// Gradient of [`ReconLoss::smoothed`] with respect to `R`.
    pub fn residual_grad(&self, r: &Mat, o: &Mask) -> Mat {
        match self {
            ReconLoss::L21 { eps } => l21_grad(r, o, *eps).expect("shapes checked by caller"),
            ReconLoss::SquaredFrobenius => Mat::from_fn(r.rows(), r.cols(), |i, j| if o.get(i, j) { 2.0 * r[(i, j)] } else { 0.0 }),
        }
    }

    /// Per-row curvature of a quadratic majorizer of the surrogate at `R`.
    pub fn row_curvature(&self, r: &Mat, o: &Mask) -> Vec<f64> {
        match self {
            ReconLoss::L21 { eps } => (0..r.rows()).map(|i| 1.0 / libm::sqrt(masked_row_sq(r, o, i) + eps * eps)).collect(),
            ReconLoss::SquaredFrobenius => alloc::vec![2.0; r.rows()],
        }
    }
}

/// Loss on label logits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LabelLoss {
    Focal(LossConfig),
    /// `(σ(z) − y)²`.
    SquaredError,
}

impl LabelLoss {
    pub fn entry(&self, y: f64, z: f64) -> f64 {
        match self {
            LabelLoss::Focal(cfg) => focal_loss(y, sigmoid(z), cfg),
            LabelLoss::SquaredError => {
                let d = sigmoid(z) - y;
                d * d
            }
        }
    }

    pub fn entry_dz(&self, y: f64, z: f64) -> f64 {
        match self {
            LabelLoss::Focal(cfg) => focal_dz(y, z, cfg),
            LabelLoss::SquaredError => {
                let p = sigmoid(z);
                2.0 * (p - y) * p * (1.0 - p)
            }
        }
    }

    /// Sum over observed entries of the logit matrix `Z`.
    pub fn total(&self, z: &Mat, y: &Mat, o: &Mask) -> f64 {
        let mut sum = 0.0;
        for i in 0..z.rows() {
            for j in 0..z.cols() {
                if o.get(i, j) {
                    sum += self.entry(y[(i, j)], z[(i, j)]);
                }
            }
        }
        sum
    }

    /// Entry-wise derivative with respect to the logits, zero where unobserved.
    pub fn logit_grad(&self, z: &Mat, y: &Mat, o: &Mask) -> Mat {
        Mat::from_fn(z.rows(), z.cols(), |i, j| if o.get(i, j) { self.entry_dz(y[(i, j)], z[(i, j)]) } else { 0.0 })
    }

    /// Second derivative of one entry by central differences.
    pub fn entry_d2z(&self, y: f64, z: f64) -> f64 {
        const H: f64 = 1e-5;
        (self.entry_dz(y, z + H) - self.entry_dz(y, z - H)) / (2.0 * H)
    }

    /// Local curvature per observed entry, floored at `floor`; zero where
    /// unobserved.
    pub fn local_curvature(&self, z: &Mat, y: &Mat, o: &Mask, floor: f64) -> Mat {
        Mat::from_fn(z.rows(), z.cols(), |i, j| {
            if o.get(i, j) {
                let c = self.entry_d2z(y[(i, j)], z[(i, j)]);
                if c.is_finite() { c.max(floor) } else { floor }
            } else {
                0.0
            }
        })
    }

    /// Upper bound on |d²/dz²| of a single entry, found by scanning the
    /// logit axis. Used to scale gradient steps; the line search absorbs
    /// any slack.
    pub fn curvature_bound(&self) -> f64 {
        const H: f64 = 1e-4;
        let mut best: f64 = 0.0;
        let mut z = -40.0;
        while z <= 40.0 {
            for y in [0.0, 1.0] {
                let c = (self.entry_dz(y, z + H) - self.entry_dz(y, z - H)) / (2.0 * H);
                if c.is_finite() {
                    best = best.max(c.abs());
                }
            }
            z += 0.01;
        }
        1.05 * best
    }
}

/// Full objective specification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveSpec {
    pub lambda: f64,
    pub mu: f64,
    pub view_exponent: f64,
    pub recon: ReconLoss,
    pub label: LabelLoss,
}

impl ObjectiveSpec {
    /// The focal / L2,1 objective with weights λ and μ.
    pub fn standard(lambda: f64, mu: f64, cfg: &LossConfig) -> Self {
        Self {
            lambda,
            mu,
            view_exponent: cfg.view_exponent,
            recon: ReconLoss::L21 { eps: cfg.eps_l21 },
            label: LabelLoss::Focal(*cfg),
        }
    }
}

/// `h_{vv'} = hsic(U^v, U^{v'})` for all pairs, zero diagonal.
pub fn pairwise_hsic(weights: &[Mat], kernels: &[Kernel]) -> Result<Mat> {
    let grams: Vec<GramMatrix> = weights.iter().zip(kernels).map(|(u, &k)| gram_with(u, k)).collect();
    pairwise_hsic_from_grams(&grams)
}

pub fn pairwise_hsic_from_grams(grams: &[GramMatrix]) -> Result<Mat> {
    let b = grams.len();
    let mut h = Mat::zeros(b, b);
    for v in 0..b {
        for w in (v + 1)..b {
            let value = hsic_from_grams(&grams[v], &grams[w])?;
            h[(v, w)] = value;
            h[(w, v)] = value;
        }
    }
    Ok(h)
}

fn check_state(state: &ModelState, ds: &MultiViewDataset, kernels: &[Kernel]) -> Result<()> {
    let m = ds.n_views();
    if state.view_weights.len() != m {
        return Err(Error::Shape { context: "view weights", expected: (m, 1), found: (state.view_weights.len(), 1) });
    }
    if state.hsic_weights.shape() != (m + 1, m + 1) {
        return Err(Error::Shape { context: "hsic weights", expected: (m + 1, m + 1), found: state.hsic_weights.shape() });
    }
    if state.weights.len() != m + 1 || kernels.len() != m + 1 {
        return Err(Error::Shape { context: "weight matrices", expected: (m + 1, 1), found: (state.weights.len(), kernels.len()) });
    }
    let (n, k) = state.embedding.shape();
    if n != ds.n_samples() {
        return Err(Error::Shape { context: "embedding", expected: (ds.n_samples(), k), found: state.embedding.shape() });
    }
    for (v, u) in state.weights.iter().enumerate() {
        let d = if v < m { ds.view(v).cols() } else { ds.n_labels() };
        if u.shape() != (k, d) {
            return Err(Error::Shape { context: "weight matrix", expected: (k, d), found: u.shape() });
        }
    }
    Ok(())
}

fn evaluate(state: &ModelState, ds: &MultiViewDataset, spec: &ObjectiveSpec, kernels: &[Kernel], smoothed: bool) -> Result<ObjectiveBreakdown> {
    check_state(state, ds, kernels)?;
    let f = &state.embedding;
    let mut recon = 0.0;
    for v in 0..ds.n_views() {
        let r = ds.view(v).sub(&f.matmul(&state.weights[v]));
        let o = ds.feature_mask(v);
        let e = if smoothed { spec.recon.smoothed(&r, o) } else { spec.recon.value(&r, o) };
        recon += libm::pow(state.view_weights[v], spec.view_exponent) * e;
    }
    let label = if spec.lambda != 0.0 {
        spec.lambda * spec.label.total(&state.label_logits(), ds.labels(), ds.label_mask())
    } else {
        0.0
    };
    let hsic = if spec.mu != 0.0 && state.rank() >= 2 {
        let h = pairwise_hsic(&state.weights, kernels)?;
        spec.mu * h.dot(&state.hsic_weights)
    } else {
        0.0
    };
    Ok(ObjectiveBreakdown::new(recon, label, hsic))
}

/// Value of the full objective with exact L2,1 terms.
///
/// `kernels` holds one resolved kernel per weight matrix (views then labels).
pub fn objective(state: &ModelState, ds: &MultiViewDataset, spec: &ObjectiveSpec, kernels: &[Kernel]) -> Result<ObjectiveBreakdown> {
    evaluate(state, ds, spec, kernels, false)
}

/// Same as [`objective`] but with the ε-smoothed reconstruction surrogate.
pub fn smoothed_objective(state: &ModelState, ds: &MultiViewDataset, spec: &ObjectiveSpec, kernels: &[Kernel]) -> Result<ObjectiveBreakdown> {
    evaluate(state, ds, spec, kernels, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOCAL_HALF: f64 = 0.5 * 0.25 * core::f64::consts::LN_2;

    #[test]
    fn masked_l21_examples() {
        let r = Mat::from_rows(&[&[3.0, 4.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(masked_l21(&r, &Mask::full(2, 2)).unwrap(), 5.0);
        assert_eq!(masked_l21(&r, &Mask::empty(2, 2)).unwrap(), 0.0);
        let r1 = Mat::from_rows(&[&[3.0, 4.0]]).unwrap();
        let o = Mask::from_fn(1, 2, |_, j| j == 0);
        assert_eq!(masked_l21(&r1, &o).unwrap(), 3.0);
        assert!(masked_l21(&r1, &Mask::full(2, 2)).is_err());
    }

    #[test]
    fn l21_grad_examples() {
        let r = Mat::from_rows(&[&[3.0, 4.0], &[0.0, 0.0]]).unwrap();
        let g = l21_grad(&r, &Mask::full(2, 2), 1e-8).unwrap();
        assert!((g[(0, 0)] - 0.6).abs() < 1e-12 && (g[(0, 1)] - 0.8).abs() < 1e-12);
        assert_eq!(g.row(1), &[0.0, 0.0]);
        let o = Mask::from_fn(2, 2, |_, j| j == 1);
        let g = l21_grad(&r, &o, 1e-8).unwrap();
        assert_eq!(g[(0, 0)], 0.0);
        assert!((g[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn focal_examples() {
        let cfg = LossConfig::default();
        assert!(focal_loss(1.0, 1.0, &cfg) < 1e-20);
        assert!((focal_loss(1.0, 0.5, &cfg) - FOCAL_HALF).abs() < 1e-15);
        assert!((focal_loss(1.0, 0.5, &cfg) - 0.08664).abs() < 1e-5);
        let ce = LossConfig { gamma: 0.0, ..cfg };
        for &(y, p) in &[(1.0, 0.3), (0.0, 0.3), (1.0, 0.99), (0.0, 0.01)] {
            let bce = if y == 1.0 { -libm::log(p) } else { -libm::log(1.0 - p) };
            assert!((focal_loss(y, p, &ce) - 0.5 * bce).abs() < 1e-15);
        }
    }

    #[test]
    fn label_term_examples() {
        let cfg = LossConfig::default();
        let f = Mat::zeros(2, 2);
        let u = Mat::zeros(2, 3);
        let y = Mat::filled(2, 3, 1.0);
        assert_eq!(label_term(&f, &u, &y, &Mask::empty(2, 3), &cfg).unwrap(), 0.0);
        let single = Mask::from_fn(2, 3, |i, j| i == 0 && j == 1);
        assert!((label_term(&f, &u, &y, &single, &cfg).unwrap() - FOCAL_HALF).abs() < 1e-15);
        let (gf, gu) = label_term_grads(&f, &u, &y, &Mask::empty(2, 3), &cfg).unwrap();
        assert_eq!(gf, Mat::zeros(2, 2));
        assert_eq!(gu, Mat::zeros(2, 3));
    }

    #[test]
    fn cross_entropy_reduction_of_logit_gradient() {
        let cfg = LossConfig { gamma: 0.0, ..LossConfig::default() };
        for &z in &[-3.0, -0.2, 0.0, 1.7] {
            for y in [0.0, 1.0] {
                let expected = 0.5 * (sigmoid(z) - y);
                assert!((focal_dz(y, z, &cfg) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn focal_is_decreasing_in_q() {
        let cfg = LossConfig::default();
        for y in [0.0, 1.0] {
            let mut prev = f64::INFINITY;
            for step in 1..1000 {
                let q = step as f64 / 1000.0;
                let p = if y == 1.0 { q } else { 1.0 - q };
                let value = focal_loss(y, p, &cfg);
                assert!(value >= 0.0);
                assert!(value < prev, "not decreasing at q={q}");
                prev = value;
            }
        }
    }

    #[test]
    fn curvature_bound_is_sane() {
        let ce = LabelLoss::Focal(LossConfig { gamma: 0.0, balance: 1.0, ..LossConfig::default() });
        let bound = ce.curvature_bound();
        // σ'(z) peaks at 1/4.
        assert!(bound >= 0.25 && bound < 0.27, "{bound}");
        assert!(LabelLoss::Focal(LossConfig::default()).curvature_bound() > 0.0);
        assert!(LabelLoss::SquaredError.curvature_bound() > 0.0);
    }
}
