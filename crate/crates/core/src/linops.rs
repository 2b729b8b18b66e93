//! Linear forward operators with exact adjoints.
//!
//! Every operator maps a flattened real vector of length `domain_dim` to one of
//! length `codomain_dim`. Matrix- and image-valued unknowns are flattened in
//! row-major order.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::io;

/// Default relative tolerance of the power method.
pub const DEFAULT_NORM_TOL: f64 = 1e-9;
/// Default iteration cap of the power method.
pub const DEFAULT_NORM_MAX_ITER: usize = 10_000;

const POWER_START_SEED: u64 = 0x005e_ed0f_u64;
const POWER_START_JITTER: f64 = 1e-3;

/// A set of sampled entries of a `rows x cols` grid. Acts as the orthogonal
/// projection that zeroes every unsampled entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryMask {
    rows: usize,
    cols: usize,
    /// Sorted, deduplicated row-major flat indices.
    indices: Vec<usize>,
    sampled: Vec<bool>,
}

impl EntryMask {
    pub fn new(rows: usize, cols: usize, entries: &[(usize, usize)]) -> Result<Self> {
        let mut flat = Vec::with_capacity(entries.len());
        for &(i, j) in entries {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!(
                    "mask entry ({i}, {j}) outside a {rows}x{cols} grid"
                )));
            }
            flat.push(i * cols + j);
        }
        Self::from_flat(rows, cols, flat)
    }

    pub fn from_flat(rows: usize, cols: usize, mut flat: Vec<usize>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("mask grid must be nonempty".into()));
        }
        let size = rows * cols;
        if let Some(&bad) = flat.iter().find(|&&k| k >= size) {
            return Err(Error::InvalidArgument(format!(
                "flat mask index {bad} outside a grid of {size} entries"
            )));
        }
        flat.sort_unstable();
        flat.dedup();
        let mut sampled = vec![false; size];
        for &k in &flat {
            sampled[k] = true;
        }
        Ok(Self {
            rows,
            cols,
            indices: flat,
            sampled,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Sampled flat indices in increasing order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.sampled.get(flat).copied().unwrap_or(false)
    }

    /// `(row, col)` pairs of the sampled entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.iter().map(move |&k| (k / self.cols, k % self.cols))
    }

    fn project(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(x.len());
        for &k in &self.indices {
            out[k] = x[k];
        }
        out
    }
}

/// Separable circular convolution of a `rows x cols` image with a centered,
/// odd-length, nonnegative kernel that sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Blur {
    rows: usize,
    cols: usize,
    kernel: Vec<f64>,
}

impl Blur {
    pub fn new(rows: usize, cols: usize, kernel: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("blur grid must be nonempty".into()));
        }
        if kernel.is_empty() || kernel.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "blur kernel must have odd length, got {}",
                kernel.len()
            )));
        }
        check_finite("blur kernel", &kernel)?;
        if kernel.iter().any(|&k| k < 0.0) {
            return Err(Error::InvalidArgument(
                "blur kernel coefficients must be nonnegative".into(),
            ));
        }
        let sum: f64 = kernel.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "blur kernel must sum to 1, sums to {sum}"
            )));
        }
        Ok(Self { rows, cols, kernel })
    }

    /// Sampled Gaussian of standard deviation `sigma` truncated at `radius`
    /// pixels and renormalized to unit sum.
    pub fn gaussian(rows: usize, cols: usize, sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let r = radius as f64;
        let raw: Vec<f64> = (0..=2 * radius)
            .map(|m| {
                let d = m as f64 - r;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        Self::new(rows, cols, raw.into_iter().map(|k| k / total).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn radius(&self) -> isize {
        (self.kernel.len() / 2) as isize
    }

    fn filter(&self, x: ArrayView1<f64>, reversed: bool) -> Array1<f64> {
        let (rows, cols) = (self.rows, self.cols);
        let r = self.radius();
        // Convolution reads x[i + r - m]; its adjoint reads x[i - r + m].
        let sign: isize = if reversed { -1 } else { 1 };
        let mut tmp = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = i * cols;
            for j in 0..cols {
                let mut acc = 0.0;
                for (m, &k) in self.kernel.iter().enumerate() {
                    let jj = (j as isize + sign * (r - m as isize)).rem_euclid(cols as isize);
                    acc += k * x[row + jj as usize];
                }
                tmp[row + j] = acc;
            }
        }
        let mut out = Array1::zeros(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = 0.0;
                for (m, &k) in self.kernel.iter().enumerate() {
                    let ii = (i as isize + sign * (r - m as isize)).rem_euclid(rows as isize);
                    acc += k * tmp[ii as usize * cols + j];
                }
                out[i * cols + j] = acc;
            }
        }
        out
    }
}

/// Forward map `X` of an inverse problem.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearOperator {
    /// Explicit `n x p` coefficient matrix.
    Dense(Array2<f64>),
    /// Entry sampling on a grid; domain and codomain are the full grid.
    EntryMask(EntryMask),
    /// Circular blur of an image; domain and codomain are the image grid.
    Blur(Blur),
    /// `outer ∘ inner`.
    Compose {
        outer: Box<LinearOperator>,
        inner: Box<LinearOperator>,
    },
}

impl LinearOperator {
    pub fn identity(dim: usize) -> Self {
        LinearOperator::Dense(Array2::eye(dim))
    }

    /// `outer ∘ inner`, checked for compatible dimensions.
    pub fn compose(outer: LinearOperator, inner: LinearOperator) -> Result<Self> {
        check_len("operator composition", outer.domain_dim(), inner.codomain_dim())?;
        Ok(LinearOperator::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        })
    }

    pub fn domain_dim(&self) -> usize {
        match self {
            LinearOperator::Dense(m) => m.ncols(),
            LinearOperator::EntryMask(m) => m.rows * m.cols,
            LinearOperator::Blur(b) => b.rows * b.cols,
            LinearOperator::Compose { inner, .. } => inner.domain_dim(),
        }
    }

    pub fn codomain_dim(&self) -> usize {
        match self {
            LinearOperator::Dense(m) => m.nrows(),
            LinearOperator::EntryMask(m) => m.rows * m.cols,
            LinearOperator::Blur(b) => b.rows * b.cols,
            LinearOperator::Compose { outer, .. } => outer.codomain_dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LinearOperator::Dense(_) => "dense",
            LinearOperator::EntryMask(_) => "entry_mask",
            LinearOperator::Blur(_) => "blur",
            LinearOperator::Compose { .. } => "compose",
        }
    }

    /// `X x`.
    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("operator apply", self.domain_dim(), x.len())?;
        Ok(self.apply_unchecked(x))
    }

    /// `X^T u`.
    pub fn adjoint(&self, u: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("operator adjoint", self.codomain_dim(), u.len())?;
        Ok(self.adjoint_unchecked(u))
    }

    fn apply_unchecked(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self {
            LinearOperator::Dense(m) => m.dot(&x),
            LinearOperator::EntryMask(m) => m.project(x),
            LinearOperator::Blur(b) => b.filter(x, false),
            LinearOperator::Compose { outer, inner } => {
                outer.apply_unchecked(inner.apply_unchecked(x).view())
            }
        }
    }

    fn adjoint_unchecked(&self, u: ArrayView1<f64>) -> Array1<f64> {
        match self {
            LinearOperator::Dense(m) => m.t().dot(&u),
            LinearOperator::EntryMask(m) => m.project(u),
            LinearOperator::Blur(b) => b.filter(u, true),
            LinearOperator::Compose { outer, inner } => {
                inner.adjoint_unchecked(outer.adjoint_unchecked(u).view())
            }
        }
    }

    /// Loads a dense operator from a whitespace-separated text matrix.
    pub fn load_dense(path: impl AsRef<Path>) -> Result<Self> {
        Ok(LinearOperator::Dense(io::read_matrix(path)?))
    }

    /// Loads an entry mask from a file with one `i j` pair per line.
    pub fn load_mask(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<Self> {
        let pairs = io::read_index_pairs(path)?;
        Ok(LinearOperator::EntryMask(EntryMask::new(rows, cols, &pairs)?))
    }
}

/// Result of [`op_norm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNorm {
    /// Estimate of the largest singular value (never above the true value up
    /// to rounding).
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The operator annihilated the start vector; `value` is 0.
    pub zero_operator: bool,
    /// Estimate after each power step.
    pub history: Vec<f64>,
}

/// Largest singular value of `op` by the power method on `X^T X`.
///
/// The estimate at step k is `||X x_k||` for the unit iterate `x_k`, which is
/// nondecreasing in k and bounded by `||X||`. Iteration stops once successive
/// estimates differ relatively by less than `tol`.
pub fn op_norm(op: &LinearOperator, tol: f64, max_iter: usize) -> Result<OperatorNorm> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power method tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("power method needs max_iter >= 1".into()));
    }
    let dim = op.domain_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_START_SEED);
    let base = 1.0 / (dim as f64).sqrt();
    let mut x: Array1<f64> = (0..dim)
        .map(|_| base + POWER_START_JITTER * base * rng.random_range(-1.0..1.0))
        .collect();
    let n = x.dot(&x).sqrt();
    x /= n;

    let mut history = Vec::new();
    let mut estimate = 0.0;
    for k in 0..max_iter {
        let y = op.apply_unchecked(x.view());
        let sigma = y.dot(&y).sqrt();
        history.push(sigma);
        if sigma == 0.0 {
            return Ok(OperatorNorm {
                value: 0.0,
                iterations: k + 1,
                converged: false,
                zero_operator: true,
                history,
            });
        }
        if k > 0 && (sigma - estimate).abs() < tol * sigma {
            return Ok(OperatorNorm {
                value: sigma,
                iterations: k + 1,
                converged: true,
                zero_operator: false,
                history,
            });
        }
        estimate = sigma;
        let z = op.adjoint_unchecked(y.view());
        let zn = z.dot(&z).sqrt();
        if zn == 0.0 {
            // y lies in the range of X, so X^T y vanishes only through rounding
            break;
        }
        x = z / zn;
    }
    Ok(OperatorNorm {
        value: estimate,
        iterations: history.len(),
        converged: false,
        zero_operator: false,
        history,
    })
}

/// [`op_norm`] with the default tolerance and iteration cap.
pub fn op_norm_default(op: &LinearOperator) -> Result<OperatorNorm> {
    op_norm(op, DEFAULT_NORM_TOL, DEFAULT_NORM_MAX_ITER)
}
