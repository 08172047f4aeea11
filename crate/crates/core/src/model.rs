use alloc::vec::Vec;

use crate::linalg::Mat;

/// Factorization state: shared embedding, per-block weight matrices and the
/// two sets of adaptive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    /// Shared nonnegative embedding `F`, n×k.
    pub embedding: Mat,
    /// `U^1..U^m` (k×d_v) followed by the label block `U^{m+1}` (k×l).
    pub weights: Vec<Mat>,
    /// View weights α on the simplex, length m.
    pub view_weights: Vec<f64>,
    /// HSIC pair weights β, (m+1)×(m+1) with zero diagonal.
    pub hsic_weights: Mat,
}

impl ModelState {
    pub fn n_views(&self) -> usize {
        self.view_weights.len()
    }

    pub fn rank(&self) -> usize {
        self.embedding.cols()
    }

    pub fn label_weights(&self) -> &Mat {
        self.weights.last().expect("state always carries a label block")
    }

    /// Uniform α (1/m each).
    pub fn uniform_view_weights(m: usize) -> Vec<f64> {
        alloc::vec![1.0 / m as f64; m]
    }

    /// Uniform β over `blocks` matrices: off-diagonal entries 1/√(blocks−1),
    /// so every row has unit L2 norm.
    pub fn uniform_hsic_weights(blocks: usize) -> Mat {
        let off = if blocks > 1 { 1.0 / libm::sqrt((blocks - 1) as f64) } else { 0.0 };
        Mat::from_fn(blocks, blocks, |i, j| if i == j { 0.0 } else { off })
    }

    /// Label logits `F U^{m+1}`.
    pub fn label_logits(&self) -> Mat {
        self.embedding.matmul(self.label_weights())
    }
}
