//! Thin QR factorization via Householder reflections.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Thin QR of an `m x l` matrix with `m >= l`: `q` is `m x l` with
/// orthonormal columns, `r` is `l x l` upper triangular with a non-negative
/// diagonal.
#[derive(Debug, Clone)]
pub struct QrResult {
    pub q: Matrix,
    pub r: Matrix,
}

/// Householder QR. Rejects `rows < cols`; callers must transpose or slice
/// first.
pub fn qr_decompose(y: &Matrix) -> Result<QrResult> {
    let (m, l) = y.shape();
    if m < l {
        return Err(Error::QrShape { rows: m, cols: l });
    }

    // Work buffer becomes R in its upper l x l block; reflectors are kept to
    // assemble the thin Q afterwards.
    let mut work = y.clone();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(l);

    for k in 0..l {
        let mut norm_sq = 0.0;
        for i in k..m {
            let x = work[(i, k)];
            norm_sq += x * x;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }

        // v = x + sign(x0) * ||x|| * e1 avoids cancellation.
        let x0 = work[(k, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
        v[0] -= alpha;
        let v_norm_sq: f64 = v.iter().map(|x| x * x).sum();
        if v_norm_sq == 0.0 {
            // Column already aligned with e1; nothing to reflect.
            reflectors.push(None);
            continue;
        }
        let beta = 2.0 / v_norm_sq;

        // Apply H = I - beta v v^T to the trailing columns.
        for j in k..l {
            let mut dot = 0.0;
            for (vi, i) in (k..m).enumerate() {
                dot += v[vi] * work[(i, j)];
            }
            let scale = beta * dot;
            for (vi, i) in (k..m).enumerate() {
                work[(i, j)] -= scale * v[vi];
            }
        }
        reflectors.push(Some(v));
    }

    // Thin Q: apply the reflectors in reverse to the leading l columns of I.
    let mut q = Matrix::zeros(m, l);
    for j in 0..l {
        q[(j, j)] = 1.0;
    }
    for k in (0..l).rev() {
        if let Some(v) = &reflectors[k] {
            let beta = 2.0 / v.iter().map(|x| x * x).sum::<f64>();
            for j in 0..l {
                let mut dot = 0.0;
                for (vi, i) in (k..m).enumerate() {
                    dot += v[vi] * q[(i, j)];
                }
                let scale = beta * dot;
                for (vi, i) in (k..m).enumerate() {
                    q[(i, j)] -= scale * v[vi];
                }
            }
        }
    }

    // R is built fresh so entries below the diagonal are exactly zero.
    let mut r = Matrix::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            r[(i, j)] = work[(i, j)];
        }
    }

    // Fix signs so diag(R) >= 0, flipping the paired Q column.
    for j in 0..l {
        if r[(j, j)] < 0.0 {
            for jj in j..l {
                r[(j, jj)] = -r[(j, jj)];
            }
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }

    Ok(QrResult { q, r })
}
