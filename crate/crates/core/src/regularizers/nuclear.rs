//! Singular value soft-thresholding on row-major flattened matrices.

use nalgebra::DMatrix;
use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

fn to_matrix(x: ArrayView1<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| x[i * cols + j])
}

fn svd_failed(m: &DMatrix<f64>) -> Error {
    Error::SvdFailed {
        rows: m.nrows(),
        cols: m.ncols(),
        frobenius: m.norm(),
    }
}

/// Singular values of the `rows x cols` matrix stored row-major in `x`, in
/// nonincreasing order.
pub fn singular_values(x: ArrayView1<f64>, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let m = to_matrix(x, rows, cols);
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| svd_failed(&m))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Output of [`shrink`].
pub struct Shrunk {
    pub point: Array1<f64>,
    /// Nuclear norm of `point`.
    pub nuclear_norm: f64,
    pub rank: usize,
}

/// `argmin_U tau ||U||_* + 1/2 ||U - X||_F^2`: keeps the singular vectors of
/// `X` and replaces each singular value `s` by `max(s - tau, 0)`.
pub fn shrink(x: ArrayView1<f64>, rows: usize, cols: usize, tau: f64) -> Result<Shrunk> {
    let m = to_matrix(x, rows, cols);
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| svd_failed(&m))?;
    let u = svd.u.as_ref().ok_or_else(|| svd_failed(&m))?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| svd_failed(&m))?;

    let kept: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter_map(|(k, &s)| (s > tau).then_some((k, s - tau)))
        .collect();

    let mut point = Array1::zeros(rows * cols);
    for &(k, s) in &kept {
        let uk = u.column(k);
        let vk = v_t.row(k);
        for i in 0..rows {
            let a = s * uk[i];
            if a == 0.0 {
                continue;
            }
            let row = i * cols;
            for j in 0..cols {
                point[row + j] += a * vk[j];
            }
        }
    }
    Ok(Shrunk {
        point,
        nuclear_norm: kept.iter().map(|&(_, s)| s).sum(),
        rank: kept.len(),
    })
}
