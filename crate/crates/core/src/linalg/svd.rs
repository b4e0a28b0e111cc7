//! Singular value decomposition via one-sided Jacobi rotations.
//!
//! The iteration runs on whichever side of the input has at least as many
//! rows as columns (the transpose is decomposed otherwise and the factors
//! swapped back). Column pairs are swept cyclically; each rotation zeroes
//! one Gram off-diagonal. A pair is considered converged when
//! `|a_pq| <= 1e-12 * sqrt(a_pp * a_qq)`, and at most 60 sweeps are run.
//!
//! Conventions:
//! - singular values are sorted non-increasing,
//! - `u` columns corresponding to exactly-zero singular values are filled by
//!   Gram-Schmidt completion so `u` always has orthonormal columns,
//! - each `u` column is sign-fixed so its largest-magnitude entry is
//!   positive (the paired `v` column is flipped with it), which makes the
//!   decomposition deterministic.

use super::matrix::Matrix;

const GRAM_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// Thin SVD `A = u * diag(sigma) * v^T` with `k = min(m, n)` columns in both
/// factors and `sigma` sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    /// Dense `u * diag(sigma) * v^T`.
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.u.clone();
        for j in 0..self.sigma.len() {
            for i in 0..scaled.rows() {
                scaled[(i, j)] *= self.sigma[j];
            }
        }
        scaled.matmul(&self.v.transpose())
    }
}

/// One-sided Jacobi SVD. Deterministic for a fixed input.
pub fn svd(a: &Matrix) -> SvdResult {
    let (m, n) = a.shape();
    if m >= n {
        let (u, sigma, v) = jacobi_tall(a);
        SvdResult { u, sigma, v }
    } else {
        let (u, sigma, v) = jacobi_tall(&a.transpose());
        SvdResult { u: v, sigma, v: u }
    }
}

/// Core iteration for `m >= n`. Returns (`u` m x n, `sigma` n, `v` n x n).
fn jacobi_tall(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);

    // Column-major working copies: `b` accumulates U * diag(sigma), `v` the
    // right rotations.
    let mut b: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a[(i, j)]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (app, aqq, apq) = gram_entries(&b[p], &b[q]);
                if apq.abs() <= GRAM_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;

                // Zero the 2x2 Gram off-diagonal: t solves
                // t^2 + 2*tau*t - 1 = 0 with the smaller-magnitude root.
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                rotate_pair(&mut b, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    // Singular values are the column norms; order them non-increasing
    // (stable on ties so the result is deterministic).
    let norms: Vec<f64> = b.iter().map(|col| l2_norm(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut sigma = Vec::with_capacity(n);
    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for &j in &order {
        sigma.push(norms[j]);
        if norms[j] > 0.0 {
            u_cols.push(Some(b[j].iter().map(|x| x / norms[j]).collect()));
        } else {
            u_cols.push(None);
        }
        v_cols.push(v[j].clone());
    }

    complete_zero_columns(&mut u_cols, m);

    // Sign convention: largest-magnitude entry of each u column positive.
    let mut u = Matrix::zeros(m, n);
    let mut v_out = Matrix::zeros(n, n);
    for j in 0..n {
        let col = u_cols[j].as_ref().expect("completed");
        let pivot = col
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().total_cmp(&b.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            u[(i, j)] = flip * col[i];
        }
        for i in 0..n {
            v_out[(i, j)] = flip * v_cols[j][i];
        }
    }

    (u, sigma, v_out)
}

fn gram_entries(p: &[f64], q: &[f64]) -> (f64, f64, f64) {
    let mut app = 0.0;
    let mut aqq = 0.0;
    let mut apq = 0.0;
    for (x, y) in p.iter().zip(q) {
        app += x * x;
        aqq += y * y;
        apq += x * y;
    }
    (app, aqq, apq)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    for i in 0..cols[p].len() {
        let xp = cols[p][i];
        let xq = cols[q][i];
        cols[p][i] = c * xp - s * xq;
        cols[q][i] = s * xp + c * xq;
    }
}

fn l2_norm(col: &[f64]) -> f64 {
    col.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Replaces `None` columns with unit vectors orthogonal to every other
/// column, chosen deterministically from the standard basis.
fn complete_zero_columns(cols: &mut [Option<Vec<f64>>], m: usize) {
    for j in 0..cols.len() {
        if cols[j].is_some() {
            continue;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for candidate in 0..m {
            let mut vec = vec![0.0; m];
            vec[candidate] = 1.0;
            // Two Gram-Schmidt passes keep the residual orthogonal even when
            // the candidate nearly lies in the existing span.
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let dot: f64 = vec.iter().zip(other).map(|(a, b)| a * b).sum();
                    for (x, o) in vec.iter_mut().zip(other) {
                        *x -= dot * o;
                    }
                }
            }
            let norm = l2_norm(&vec);
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn) {
                best = Some((norm, vec));
            }
        }
        let (norm, vec) = best.expect("m > 0");
        debug_assert!(norm > 0.0, "no orthogonal completion available");
        cols[j] = Some(vec.iter().map(|x| x / norm).collect());
    }
}
