//! Gram matrices over the rows of a weight matrix, the biased HSIC
//! estimator `(k−1)⁻² tr(K H K' H)` and its gradient.
//!
//! Grams are k×k: every weight matrix `U^v` is k×d_v, and the latent rows
//! are the only axis shared by all of them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// Median pairwise row distance.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Ignored for the linear kernel.
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub const LINEAR: KernelSpec = KernelSpec { kind: KernelKind::Linear, bandwidth: Bandwidth::Auto };
    pub const GAUSSIAN_AUTO: KernelSpec = KernelSpec { kind: KernelKind::Gaussian, bandwidth: Bandwidth::Auto };

    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec { kind: KernelKind::Gaussian, bandwidth: Bandwidth::Fixed(sigma) }
    }

    /// Fixes the bandwidth for `u`, evaluating the median heuristic if needed.
    pub fn resolve(&self, u: &Mat) -> Result<Kernel> {
        match (self.kind, self.bandwidth) {
            (KernelKind::Linear, _) => Ok(Kernel::Linear),
            (KernelKind::Gaussian, Bandwidth::Fixed(sigma)) => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(Kernel::Gaussian { sigma })
                } else {
                    Err(Error::InvalidParameter(alloc::format!("gaussian bandwidth {sigma} must be positive")))
                }
            }
            (KernelKind::Gaussian, Bandwidth::Auto) => {
                check_rows(u)?;
                Ok(Kernel::Gaussian { sigma: median_bandwidth(u) })
            }
        }
    }
}

/// A kernel with its bandwidth fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    Linear,
    Gaussian { sigma: f64 },
}

/// Symmetric k×k Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(pub Mat);

impl GramMatrix {
    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    /// `H K H` with `H = I − (1/k) 𝟙𝟙ᵀ`.
    pub fn centered(&self) -> Mat {
        let k = self.0.rows();
        let kf = k as f64;
        let row_means: Vec<f64> = (0..k).map(|i| self.0.row(i).iter().sum::<f64>() / kf).collect();
        let col_means: Vec<f64> = (0..k).map(|j| (0..k).map(|i| self.0[(i, j)]).sum::<f64>() / kf).collect();
        let grand = row_means.iter().sum::<f64>() / kf;
        Mat::from_fn(k, k, |i, j| self.0[(i, j)] - row_means[i] - col_means[j] + grand)
    }
}

fn check_rows(u: &Mat) -> Result<()> {
    if u.rows() < 2 {
        return Err(Error::TooFewRows(u.rows()));
    }
    Ok(())
}

fn squared_distances(u: &Mat) -> Mat {
    let k = u.rows();
    let mut d = Mat::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let s: f64 = u.row(i).iter().zip(u.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}

pub fn gram(u: &Mat, spec: &KernelSpec) -> Result<GramMatrix> {
    check_rows(u)?;
    Ok(gram_with(u, spec.resolve(u)?))
}

/// Gram matrix for an already resolved kernel.
pub fn gram_with(u: &Mat, kernel: Kernel) -> GramMatrix {
    match kernel {
        Kernel::Linear => GramMatrix(u.matmul_t(u)),
        Kernel::Gaussian { sigma } => {
            let scale = 1.0 / (2.0 * sigma * sigma);
            GramMatrix(squared_distances(u).map(|d| libm::exp(-d * scale)))
        }
    }
}

/// Median of the k(k−1)/2 pairwise row distances, or 1.0 when it is zero.
pub fn median_bandwidth(u: &Mat) -> f64 {
    let k = u.rows();
    let d2 = squared_distances(u);
    let mut dists: Vec<f64> = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            dists.push(libm::sqrt(d2[(i, j)]));
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 { dists[mid] } else { 0.5 * (dists[mid - 1] + dists[mid]) };
    if median > 0.0 && median.is_finite() {
        median
    } else {
        1.0
    }
}

/// `(k−1)⁻² tr(K H K' H)` from two Grams, clamped at zero.
pub fn hsic_from_grams(a: &GramMatrix, b: &GramMatrix) -> Result<f64> {
    let k = a.0.rows();
    if b.0.rows() != k {
        return Err(Error::Shape { context: "hsic", expected: a.0.shape(), found: b.0.shape() });
    }
    if k < 2 {
        return Err(Error::TooFewRows(k));
    }
    let norm = ((k - 1) * (k - 1)) as f64;
    // tr(K H K' H) = Σ_ij (H K H)_ij K'_ij for symmetric K'.
    let value = dot(a.centered().as_slice(), b.0.as_slice()) / norm;
    Ok(value.max(0.0))
}

pub fn hsic(u: &Mat, u_other: &Mat, spec: &KernelSpec, spec_other: &KernelSpec) -> Result<f64> {
    hsic_resolved(u, u_other, spec.resolve(u)?, spec_other.resolve(u_other)?)
}

pub fn hsic_resolved(u: &Mat, u_other: &Mat, kernel: Kernel, kernel_other: Kernel) -> Result<f64> {
    check_pair(u, u_other)?;
    hsic_from_grams(&gram_with(u, kernel), &gram_with(u_other, kernel_other))
}

fn check_pair(u: &Mat, u_other: &Mat) -> Result<()> {
    if u.rows() != u_other.rows() {
        return Err(Error::Shape { context: "hsic", expected: (u.rows(), u.cols()), found: u_other.shape() });
    }
    check_rows(u)
}

/// ∂ hsic(U, U') / ∂U with U' held constant.
pub fn hsic_gradient(u: &Mat, u_other: &Mat, spec: &KernelSpec, spec_other: &KernelSpec) -> Result<Mat> {
    check_pair(u, u_other)?;
    let other = gram_with(u_other, spec_other.resolve(u_other)?);
    Ok(hsic_gradient_against(u, spec.resolve(u)?, &other))
}

/// Gradient of `hsic(U, ·)` against a fixed Gram of the other matrix.
/// Callers guarantee matching row counts of at least two.
pub fn hsic_gradient_against(u: &Mat, kernel: Kernel, other: &GramMatrix) -> Mat {
    let k = u.rows();
    let norm = ((k - 1) * (k - 1)) as f64;
    let mut g = other.centered();
    g.scale(1.0 / norm);
    match kernel {
        Kernel::Linear => {
            let mut out = g.matmul(u);
            out.scale(2.0);
            out
        }
        Kernel::Gaussian { sigma } => {
            let kmat = gram_with(u, kernel).0;
            // W = G ∘ K; gradient = −(2/σ²) (diag(W𝟙) − W) U.
            let w = Mat::from_fn(k, k, |i, j| g[(i, j)] * kmat[(i, j)]);
            let wu = w.matmul(u);
            let c = -2.0 / (sigma * sigma);
            Mat::from_fn(k, u.cols(), |i, j| {
                let row_sum: f64 = w.row(i).iter().sum();
                c * (row_sum * u[(i, j)] - wu[(i, j)])
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_gram_of_identity_is_identity() {
        let g = gram(&Mat::identity(2), &KernelSpec::LINEAR).unwrap();
        assert_eq!(g.0, Mat::identity(2));
    }

    #[test]
    fn gaussian_gram_diagonal_and_duplicates() {
        let u = Mat::from_rows(&[&[0.3, -1.0], &[2.0, 0.5], &[1.0, 1.0]]).unwrap();
        let g = gram(&u, &KernelSpec::GAUSSIAN_AUTO).unwrap();
        for i in 0..3 {
            assert_eq!(g.0[(i, i)], 1.0);
        }
        assert!(g.0.as_slice().iter().all(|&x| x > 0.0 && x <= 1.0));
        let same = Mat::from_rows(&[&[1.0, 2.0], &[1.0, 2.0]]).unwrap();
        assert_eq!(gram(&same, &KernelSpec::GAUSSIAN_AUTO).unwrap().0, Mat::filled(2, 2, 1.0));
    }

    #[test]
    fn gram_needs_two_rows() {
        assert_eq!(gram(&Mat::zeros(1, 3), &KernelSpec::LINEAR), Err(Error::TooFewRows(1)));
    }

    #[test]
    fn median_bandwidth_examples() {
        let two = Mat::from_rows(&[&[0.0, 0.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(median_bandwidth(&two), 5.0);
        assert_eq!(median_bandwidth(&Mat::filled(4, 2, 0.7)), 1.0);
        let three = Mat::from_rows(&[&[0.0], &[1.0], &[3.0]]).unwrap();
        assert_eq!(median_bandwidth(&three), 2.0);
    }

    #[test]
    fn hsic_identity_and_constant() {
        let i2 = Mat::identity(2);
        assert_eq!(hsic(&i2, &i2, &KernelSpec::LINEAR, &KernelSpec::LINEAR).unwrap(), 1.0);
        let constant = Mat::filled(2, 3, 0.4);
        assert_eq!(hsic(&i2, &constant, &KernelSpec::LINEAR, &KernelSpec::GAUSSIAN_AUTO).unwrap(), 0.0);
        assert!(hsic(&i2, &Mat::zeros(3, 2), &KernelSpec::LINEAR, &KernelSpec::LINEAR).is_err());
    }

    #[test]
    fn constant_rows_give_zero_gradient() {
        let u = Mat::from_rows(&[&[0.1, 0.2], &[0.5, -0.3], &[1.0, 0.0]]).unwrap();
        let c = Mat::filled(3, 4, 2.0);
        for spec in [KernelSpec::LINEAR, KernelSpec::gaussian(1.0)] {
            let g = hsic_gradient(&u, &c, &spec, &KernelSpec::LINEAR).unwrap();
            assert!(g.as_slice().iter().all(|x| x.abs() < 1e-15));
        }
    }
}
