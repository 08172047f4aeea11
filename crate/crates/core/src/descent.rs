//! Block majorize-minimize steps with Armijo backtracking.
//!
//! Each block (a row of `F` or a column of `U^v`) gets a k×k curvature
//! matrix from a quadratic majorizer of the smooth terms. The step target
//! minimizes that quadratic model over the feasible box, and the move is
//! accepted along the segment towards it once the Armijo condition holds.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{Mask, Mat};
use crate::solver::ArmijoConfig;

const QP_SWEEPS: usize = 200;

/// Which axis of the parameter matrix indexes the blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BlockAxis {
    Rows,
    Cols,
}

pub(crate) enum Step {
    Accepted(Mat, f64),
    Stationary,
    Failed,
}

/// Minimizes `gᵀ(y − x) + ½ (y − x)ᵀ H (y − x)` over `y ≥ 0` (or all of
/// ℝᵏ when `project` is false) by Gauss-Seidel sweeps.
pub(crate) fn solve_box_qp(h: &Mat, g: &[f64], x: &[f64], project: bool) -> Vec<f64> {
    let k = x.len();
    let mut y = x.to_vec();
    // delta = y − x, kept alongside to avoid cancellation.
    let mut delta = vec![0.0; k];
    for _ in 0..QP_SWEEPS {
        let mut biggest: f64 = 0.0;
        for a in 0..k {
            let haa = h[(a, a)];
            if haa <= 0.0 {
                continue;
            }
            let grad_a = g[a] + h.row(a).iter().zip(&delta).map(|(hab, d)| hab * d).sum::<f64>();
            let mut next = y[a] - grad_a / haa;
            if project && next < 0.0 {
                next = 0.0;
            }
            let change = next - y[a];
            if change != 0.0 {
                biggest = biggest.max(change.abs());
                y[a] = next;
                delta[a] += change;
            }
        }
        let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if biggest <= 1e-13 * scale {
            break;
        }
    }
    y
}

/// Majorizer step over all blocks followed by backtracking on `eval`.
pub(crate) fn block_newton_step(
    x: &Mat,
    grad: &Mat,
    hessians: &[Mat],
    axis: BlockAxis,
    project: bool,
    f0: f64,
    armijo: &ArmijoConfig,
    eval: impl Fn(&Mat) -> f64,
) -> Step {
    let (rows, cols) = x.shape();
    let mut target = x.clone();
    let blocks = match axis {
        BlockAxis::Rows => rows,
        BlockAxis::Cols => cols,
    };
    let block_len = match axis {
        BlockAxis::Rows => cols,
        BlockAxis::Cols => rows,
    };
    let mut xb = vec![0.0; block_len];
    let mut gb = vec![0.0; block_len];
    for b in 0..blocks {
        for a in 0..block_len {
            let (i, j) = match axis {
                BlockAxis::Rows => (b, a),
                BlockAxis::Cols => (a, b),
            };
            xb[a] = x[(i, j)];
            gb[a] = grad[(i, j)];
        }
        let yb = solve_box_qp(&hessians[b], &gb, &xb, project);
        for (a, y) in yb.into_iter().enumerate() {
            let (i, j) = match axis {
                BlockAxis::Rows => (b, a),
                BlockAxis::Cols => (a, b),
            };
            target[(i, j)] = y;
        }
    }
    let direction = target.sub(x);
    let slope = grad.dot(&direction);
    if direction.frobenius_sq() == 0.0 || !(slope < 0.0) {
        return Step::Stationary;
    }
    let mut t = 1.0;
    for _ in 0..=armijo.max_backtracks {
        let mut cand = x.clone();
        cand.axpy(t, &direction);
        if project {
            // Guards round-off only: x and target are both feasible.
            for c in cand.as_mut_slice() {
                if *c < 0.0 {
                    *c = 0.0;
                }
            }
        }
        let value = eval(&cand);
        if value.is_finite() && value <= f0 + armijo.slope * t * slope {
            return Step::Accepted(cand, value);
        }
        t *= armijo.shrink;
    }
    Step::Failed
}

/// `Σ_{j observed} c_j c_jᵀ` over the columns `c_j` of `u` (k×d), reusing
/// `full = U Uᵀ` when every column is observed.
pub(crate) fn masked_column_outer(u: &Mat, observed: &[bool], full: &Mat) -> Mat {
    if observed.iter().all(|&o| o) {
        return full.clone();
    }
    let k = u.rows();
    let mut h = Mat::zeros(k, k);
    if !observed.iter().any(|&o| o) {
        return h;
    }
    for (j, _) in observed.iter().enumerate().filter(|(_, &o)| o) {
        for a in 0..k {
            let ua = u[(a, j)];
            if ua == 0.0 {
                continue;
            }
            for b in 0..k {
                h[(a, b)] += ua * u[(b, j)];
            }
        }
    }
    h
}

/// Per-column `Σ_i w_i O_ij f_i f_iᵀ` for a mask over an n×d block.
pub(crate) fn column_hessians(f: &Mat, row_weights: &[f64], mask: &Mask) -> Vec<Mat> {
    let (n, k) = f.shape();
    let d = mask.cols();
    let mut shared = Mat::zeros(k, k);
    let mut partial = Vec::new();
    for i in 0..n {
        if mask.row_all(i) {
            add_outer(&mut shared, f.row(i), row_weights[i]);
        } else if mask.row_any(i) {
            partial.push(i);
        }
    }
    (0..d)
        .map(|j| {
            let mut h = shared.clone();
            for &i in &partial {
                if mask.get(i, j) {
                    add_outer(&mut h, f.row(i), row_weights[i]);
                }
            }
            h
        })
        .collect()
}

/// Per-row `Σ_j W_ij c_j c_jᵀ` over the columns `c_j` of `u` (k×d).
pub(crate) fn entry_row_hessians(u: &Mat, weights: &Mat) -> Vec<Mat> {
    let k = u.rows();
    let cols: Vec<Vec<f64>> = (0..u.cols()).map(|j| (0..k).map(|a| u[(a, j)]).collect()).collect();
    (0..weights.rows())
        .map(|i| {
            let mut h = Mat::zeros(k, k);
            for (j, c) in cols.iter().enumerate() {
                add_outer(&mut h, c, weights[(i, j)]);
            }
            h
        })
        .collect()
}

/// Per-column `Σ_i W_ij f_i f_iᵀ` over the rows `f_i` of `f` (n×k).
pub(crate) fn entry_column_hessians(f: &Mat, weights: &Mat) -> Vec<Mat> {
    let k = f.cols();
    (0..weights.cols())
        .map(|j| {
            let mut h = Mat::zeros(k, k);
            for i in 0..f.rows() {
                add_outer(&mut h, f.row(i), weights[(i, j)]);
            }
            h
        })
        .collect()
}

pub(crate) fn add_outer(h: &mut Mat, v: &[f64], w: f64) {
    if w == 0.0 {
        return;
    }
    let k = v.len();
    for a in 0..k {
        let wa = w * v[a];
        if wa == 0.0 {
            continue;
        }
        for b in 0..k {
            h[(a, b)] += wa * v[b];
        }
    }
}

/// Adds `shift` to every diagonal entry.
pub(crate) fn add_diagonal(h: &mut Mat, shift: f64) {
    for a in 0..h.rows() {
        h[(a, a)] += shift;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_qp_solves_linear_system() {
        let h = Mat::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let x = [1.0, -1.0];
        let g = [1.0, 2.0];
        let y = solve_box_qp(&h, &g, &x, false);
        // H (y − x) = −g
        let d = [y[0] - x[0], y[1] - x[1]];
        assert!((4.0 * d[0] + d[1] + 1.0).abs() < 1e-10);
        assert!((d[0] + 3.0 * d[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn box_qp_respects_bound() {
        let h = Mat::identity(2);
        let y = solve_box_qp(&h, &[5.0, -1.0], &[1.0, 1.0], true);
        assert_eq!(y, vec![0.0, 2.0]);
    }

    #[test]
    fn column_hessians_match_direct_sum() {
        let f = Mat::from_fn(4, 2, |i, j| (i + 2 * j) as f64 * 0.3);
        let w = [1.0, 2.0, 0.5, 3.0];
        let mask = Mask::from_fn(4, 3, |i, j| !(i == 1 && j == 2) && i != 3);
        let hs = column_hessians(&f, &w, &mask);
        for j in 0..3 {
            let mut direct = Mat::zeros(2, 2);
            for i in 0..4 {
                if mask.get(i, j) {
                    add_outer(&mut direct, f.row(i), w[i]);
                }
            }
            for (a, b) in hs[j].as_slice().iter().zip(direct.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
