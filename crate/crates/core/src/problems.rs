//! Seeded synthetic problems, the source-condition oracle, and evaluation
//! metrics.
//!
//! Every generator is a pure function of its arguments: the random stream is a
//! ChaCha8 generator seeded per call.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::io;
use crate::linops::{Blur, EntryMask, LinearOperator};
use crate::regularizers::{Penalty, Regularizer};

/// Support extraction threshold for false positives and negatives.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// Tolerance of the dual optimality check in [`make_oracle`].
pub const ORACLE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SparseRegression,
    MatrixCompletion,
    Deblurring,
    Oracle,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub family: Option<Family>,
    /// Number of observations.
    pub n: usize,
    /// Number of unknowns.
    pub p: usize,
    /// Grid shape of matrix or image unknowns.
    pub grid: Option<(usize, usize)>,
    pub sparsity: Option<usize>,
    pub rank: Option<usize>,
    pub sampling_ratio: Option<f64>,
    /// Noise parameter as passed to the generator.
    pub noise_level: Option<f64>,
}

/// Held-out data for [`metrics`].
#[derive(Debug, Clone, PartialEq)]
pub enum TestSet {
    /// Fresh design rows; the estimate is compared to the ground truth
    /// through them.
    Rows(Array2<f64>),
    /// Flat grid indices and the observed values there.
    Entries { indices: Vec<usize>, values: Array1<f64> },
}

#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub op: LinearOperator,
    pub y_exact: Option<Array1<f64>>,
    pub y_obs: Array1<f64>,
    /// `||y_obs - y_exact||` (realized) when `y_exact` is known.
    pub delta: f64,
    pub ground_truth: Option<Array1<f64>>,
    pub dual_certificate: Option<Array1<f64>>,
    pub seed: u64,
    pub metadata: Metadata,
    pub test: Option<TestSet>,
}

impl InverseProblem {
    /// `||y_obs - y_exact||`, if `y_exact` is known.
    pub fn noise_norm(&self) -> Option<f64> {
        self.y_exact.as_ref().map(|e| {
            let d = &self.y_obs - e;
            d.dot(&d).sqrt()
        })
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn normal_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Sparse linear regression with correlated Gaussian design.
///
/// Rows of `X` are `N(0, C^T C)` with `C` entries of standard deviation 0.1,
/// `w*` has `s` entries equal to `+-1`, and the noise has per-entry variance
/// `noise / sqrt(n)`. `delta` of the result is the realized noise norm. The
/// test set holds `n` fresh rows.
pub fn gen_sparse_regression(n: usize, p: usize, s: usize, noise: f64, seed: u64) -> Result<InverseProblem> {
    if n == 0 || p == 0 {
        return Err(invalid(format!("regression needs n, p >= 1, got {n} x {p}")));
    }
    if s > p {
        return Err(invalid(format!("sparsity {s} exceeds dimension {p}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(invalid(format!("noise level must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = normal_mat(&mut rng, p, p, 0.1);
    let x = normal_mat(&mut rng, n, p, 1.0).dot(&c);
    let x_test = normal_mat(&mut rng, n, p, 1.0).dot(&c);

    let mut w_star = Array1::zeros(p);
    for j in sample(&mut rng, p, s).into_iter() {
        w_star[j] = if rand::Rng::random_bool(&mut rng, 0.5) { 1.0 } else { -1.0 };
    }
    let y_exact = x.dot(&w_star);
    let std = (noise / (n as f64).sqrt()).sqrt();
    let y_obs = if std > 0.0 {
        &y_exact + &(normal_vec(&mut rng, n) * std)
    } else {
        y_exact.clone()
    };
    let delta = norm(&(&y_obs - &y_exact));

    Ok(InverseProblem {
        op: LinearOperator::Dense(x),
        y_exact: Some(y_exact),
        y_obs,
        delta,
        ground_truth: Some(w_star),
        dual_certificate: None,
        seed,
        metadata: Metadata {
            family: Some(Family::SparseRegression),
            n,
            p,
            sparsity: Some(s),
            noise_level: Some(noise),
            ..Metadata::default()
        },
        test: Some(TestSet::Rows(x_test)),
    })
}

/// Low-rank matrix completion.
///
/// `W = A B` with standard Gaussian factors of inner size `rank`; a fraction
/// `ratio` of the entries, drawn without replacement, is observed with
/// additive `N(0, sigma^2)` noise. The test set is every unobserved entry of
/// the noisy matrix.
pub fn gen_matrix_completion(
    rows: usize,
    cols: usize,
    rank: usize,
    ratio: f64,
    sigma: f64,
    seed: u64,
) -> Result<InverseProblem> {
    if rows == 0 || cols == 0 {
        return Err(invalid("matrix completion needs a nonempty grid"));
    }
    if rank > rows.min(cols) {
        return Err(invalid(format!("rank {rank} exceeds min({rows}, {cols})")));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(invalid(format!("sampling ratio must lie in (0, 1], got {ratio}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise std must be >= 0, got {sigma}")));
    }
    let size = rows * cols;
    let count = (ratio * size as f64).round() as usize;
    if count == 0 {
        return Err(invalid(format!("ratio {ratio} samples no entry of a {rows}x{cols} grid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = normal_mat(&mut rng, rows, rank, 1.0);
    let b = normal_mat(&mut rng, rank, cols, 1.0);
    let truth = Array1::from_iter(a.dot(&b).iter().copied());
    let noisy = if sigma > 0.0 {
        &truth + &(normal_vec(&mut rng, size) * sigma)
    } else {
        truth.clone()
    };
    let observed = sample(&mut rng, size, count).into_vec();
    let mask = EntryMask::from_flat(rows, cols, observed)?;

    let mut y_exact = Array1::zeros(size);
    let mut y_obs = Array1::zeros(size);
    for &k in mask.indices() {
        y_exact[k] = truth[k];
        y_obs[k] = noisy[k];
    }
    let held_out: Vec<usize> = (0..size).filter(|&k| !mask.contains(k)).collect();
    let values = held_out.iter().map(|&k| noisy[k]).collect();
    let delta = norm(&(&y_obs - &y_exact));

    Ok(InverseProblem {
        op: LinearOperator::EntryMask(mask),
        y_exact: Some(y_exact),
        y_obs,
        delta,
        ground_truth: Some(truth),
        dual_certificate: None,
        seed,
        metadata: Metadata {
            family: Some(Family::MatrixCompletion),
            n: count,
            p: size,
            grid: Some((rows, cols)),
            rank: Some(rank),
            sampling_ratio: Some(ratio),
            noise_level: Some(sigma),
            ..Metadata::default()
        },
        test: (!held_out.is_empty()).then_some(TestSet::Entries {
            indices: held_out,
            values,
        }),
    })
}

/// Gaussian blur with standard deviation one pixel (radius 3) plus
/// `N(0, noise_var)` noise.
pub fn gen_deblur(image: &Array2<f64>, noise_var: f64, seed: u64) -> Result<InverseProblem> {
    let (rows, cols) = image.dim();
    if rows == 0 || cols == 0 {
        return Err(invalid("empty image"));
    }
    gen_deblur_with(image, Blur::gaussian(rows, cols, 1.0, 3)?, noise_var, seed)
}

/// [`gen_deblur`] with an explicit blur.
pub fn gen_deblur_with(image: &Array2<f64>, blur: Blur, noise_var: f64, seed: u64) -> Result<InverseProblem> {
    let (rows, cols) = image.dim();
    if rows == 0 || cols == 0 {
        return Err(invalid("empty image"));
    }
    if (blur.rows(), blur.cols()) != (rows, cols) {
        return Err(invalid("blur grid does not match the image"));
    }
    if image.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(invalid("image values must lie in [0, 1]"));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(invalid(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let truth = Array1::from_iter(image.iter().copied());
    let op = LinearOperator::Blur(blur);
    let y_exact = op.apply(truth.view())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y_obs = if noise_var > 0.0 {
        &y_exact + &(normal_vec(&mut rng, rows * cols) * noise_var.sqrt())
    } else {
        y_exact.clone()
    };
    let delta = norm(&(&y_obs - &y_exact));
    Ok(InverseProblem {
        op,
        y_exact: Some(y_exact),
        y_obs,
        delta,
        ground_truth: Some(truth),
        dual_certificate: None,
        seed,
        metadata: Metadata {
            family: Some(Family::Deblurring),
            n: rows * cols,
            p: rows * cols,
            grid: Some((rows, cols)),
            noise_level: Some(noise_var),
            ..Metadata::default()
        },
        test: None,
    })
}

/// Piecewise-constant test image in `[0, 1]`: background, two rectangles and
/// a disk.
pub fn phantom(size: usize) -> Array2<f64> {
    let s = size as f64;
    Array2::from_shape_fn((size, size), |(i, j)| {
        let (y, x) = ((i as f64 + 0.5) / s, (j as f64 + 0.5) / s);
        let mut v = 0.1;
        if (0.15..0.55).contains(&y) && (0.1..0.45).contains(&x) {
            v = 0.8;
        }
        if (0.6..0.85).contains(&y) && (0.2..0.9).contains(&x) {
            v = 0.45;
        }
        let (dy, dx) = (y - 0.35, x - 0.7);
        if dy * dy + dx * dx < 0.18 * 0.18 {
            v = 1.0;
        }
        v
    })
}

/// A problem satisfying the source condition by construction.
///
/// `w = prox_{F/alpha}(-X^T v / alpha)`, so `-X^T v` is a subgradient of `R`
/// at `w` and `v` solves the exact dual problem. The noise is a seeded
/// uniformly random direction scaled to norm exactly `delta`.
pub fn make_oracle(
    op: LinearOperator,
    reg: &Regularizer,
    v_dagger: ArrayView1<f64>,
    delta: f64,
    seed: u64,
) -> Result<InverseProblem> {
    if matches!(reg.penalty(), Penalty::Tv { .. }) {
        return Err(Error::Unsupported(
            "oracle problems need an exact prox; tv is solved inexactly".into(),
        ));
    }
    check_len("dual certificate", op.codomain_dim(), v_dagger.len())?;
    if let Some(d) = reg.penalty().dim() {
        check_len("regularizer dimension", d, op.domain_dim())?;
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("noise level must be >= 0, got {delta}")));
    }
    let mut reg = reg.clone();
    reg.reset();
    let s = -op.adjoint(v_dagger)?;
    let w = reg.dual_gradient(s.view())?;
    let y_exact = op.apply(w.view())?;

    let check = op.apply(reg.dual_gradient(s.view())?.view())?;
    let residual = norm(&(&check - &y_exact));
    if residual > ORACLE_RESIDUAL_TOL {
        return Err(invalid(format!("dual optimality residual {residual:e} too large")));
    }

    let n = op.codomain_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir = normal_vec(&mut rng, n);
    let dn = norm(&dir);
    if dn > 0.0 {
        dir /= dn;
    } else {
        dir[0] = 1.0;
    }
    let y_obs = if delta > 0.0 { &y_exact + &(dir * delta) } else { y_exact.clone() };

    let grid = match *reg.penalty() {
        Penalty::Nuclear { rows, cols } => Some((rows, cols)),
        _ => None,
    };
    Ok(InverseProblem {
        metadata: Metadata {
            family: Some(Family::Oracle),
            n,
            p: op.domain_dim(),
            grid,
            noise_level: Some(delta),
            ..Metadata::default()
        },
        op,
        y_exact: Some(y_exact),
        y_obs,
        delta,
        ground_truth: Some(w),
        dual_certificate: Some(v_dagger.to_owned()),
        seed,
        test: None,
    })
}

/// Gaussian `n x p` matrix with `N(0, 1/n)` entries.
pub fn gaussian_design(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normal_mat(&mut rng, n, p, 1.0 / (n as f64).sqrt())
}

/// [`make_oracle`] on [`gaussian_design`] with a Gaussian dual certificate of
/// norm `v_norm`.
pub fn random_oracle(
    n: usize,
    p: usize,
    reg: &Regularizer,
    v_norm: f64,
    delta: f64,
    seed: u64,
) -> Result<InverseProblem> {
    if n == 0 || p == 0 {
        return Err(invalid("oracle needs n, p >= 1"));
    }
    let x = gaussian_design(n, p, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut v = normal_vec(&mut rng, n);
    let vn = norm(&v);
    v *= v_norm / vn;
    make_oracle(LinearOperator::Dense(x), reg, v.view(), delta, seed.wrapping_add(1))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub prediction_error_percent: Option<f64>,
    pub false_positives: Option<usize>,
    pub false_negatives: Option<usize>,
    pub true_positives: Option<usize>,
    /// `sqrt(sum r^2) / |A|` over the test entries `A`.
    pub rmse: Option<f64>,
    /// `sqrt(sum r^2 / |A|)`.
    pub rmse_conventional: Option<f64>,
    pub psnr: Option<f64>,
    /// Estimate and reference coincide, so the PSNR is infinite.
    pub psnr_identical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportErrors {
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_positives: usize,
}

/// Compares the supports `{|x_j| > SUPPORT_THRESHOLD}` of estimate and truth.
pub fn support_errors(estimate: ArrayView1<f64>, truth: ArrayView1<f64>) -> SupportErrors {
    let mut out = SupportErrors {
        false_positives: 0,
        false_negatives: 0,
        true_positives: 0,
    };
    for (e, t) in estimate.iter().zip(truth.iter()) {
        match (e.abs() > SUPPORT_THRESHOLD, t.abs() > SUPPORT_THRESHOLD) {
            (true, true) => out.true_positives += 1,
            (true, false) => out.false_positives += 1,
            (false, true) => out.false_negatives += 1,
            (false, false) => {}
        }
    }
    out
}

/// `100 ||X_test (w - w*)|| / ||X_test w*||`.
pub fn prediction_error_percent(x_test: &Array2<f64>, estimate: ArrayView1<f64>, truth: ArrayView1<f64>) -> Result<f64> {
    if x_test.nrows() == 0 {
        return Err(invalid("empty test set"));
    }
    check_len("prediction estimate", x_test.ncols(), estimate.len())?;
    let diff = x_test.dot(&(&estimate - &truth));
    let reference = x_test.dot(&truth);
    Ok(100.0 * norm(&diff) / norm(&reference))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmseConvention {
    /// `sqrt(sum r^2) / |A|`.
    Printed,
    /// `sqrt(sum r^2 / |A|)`.
    Conventional,
}

pub fn rmse(residuals: ArrayView1<f64>, convention: RmseConvention) -> Result<f64> {
    if residuals.is_empty() {
        return Err(invalid("empty test set"));
    }
    let sq = residuals.dot(&residuals);
    let count = residuals.len() as f64;
    Ok(match convention {
        RmseConvention::Printed => sq.sqrt() / count,
        RmseConvention::Conventional => (sq / count).sqrt(),
    })
}

/// `10 log10(1 / MSE)` for intensities in `[0, 1]`; infinite for identical
/// inputs.
pub fn psnr(estimate: ArrayView1<f64>, reference: ArrayView1<f64>) -> Result<f64> {
    check_len("psnr", reference.len(), estimate.len())?;
    if reference.is_empty() {
        return Err(invalid("empty image"));
    }
    let d = &estimate - &reference;
    let mse = d.dot(&d) / d.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// The metrics that apply to the problem's family.
pub fn metrics(problem: &InverseProblem, estimate: ArrayView1<f64>) -> Result<MetricReport> {
    check_len("estimate", problem.op.domain_dim(), estimate.len())?;
    let mut out = MetricReport::default();
    let truth = problem.ground_truth.as_ref();
    match problem.metadata.family {
        Some(Family::SparseRegression) | Some(Family::Oracle) => {
            if let Some(t) = truth {
                let s = support_errors(estimate, t.view());
                out.false_positives = Some(s.false_positives);
                out.false_negatives = Some(s.false_negatives);
                out.true_positives = Some(s.true_positives);
            }
            if let (Some(TestSet::Rows(x)), Some(t)) = (&problem.test, truth) {
                out.prediction_error_percent = Some(prediction_error_percent(x, estimate, t.view())?);
            }
        }
        Some(Family::MatrixCompletion) => match &problem.test {
            Some(TestSet::Entries { indices, values }) => {
                let r: Array1<f64> = indices.iter().zip(values.iter()).map(|(&k, &v)| estimate[k] - v).collect();
                out.rmse = Some(rmse(r.view(), RmseConvention::Printed)?);
                out.rmse_conventional = Some(rmse(r.view(), RmseConvention::Conventional)?);
            }
            _ => return Err(invalid("matrix completion metrics need held-out entries")),
        },
        Some(Family::Deblurring) => {
            let t = truth.ok_or_else(|| invalid("deblurring metrics need the clean image"))?;
            let p = psnr(estimate, t.view())?;
            out.psnr_identical = p.is_infinite();
            out.psnr = Some(p);
        }
        None => {}
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    family: Option<Family>,
    seed: u64,
    delta: f64,
    operator: String,
    domain_dim: usize,
    codomain_dim: usize,
    grid: Option<(usize, usize)>,
    kernel: Option<Vec<f64>>,
    metadata: Metadata,
}

/// Writes `operator.txt`, `y_obs.txt`, `manifest.json` and, when known,
/// `y_exact.txt` and `ground_truth.txt`.
pub fn save_problem(problem: &InverseProblem, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (grid, kernel) = match &problem.op {
        LinearOperator::Dense(m) => {
            io::write_matrix(dir.join("operator.txt"), m)?;
            (None, None)
        }
        LinearOperator::EntryMask(m) => {
            io::write_index_pairs(dir.join("operator.txt"), m.entries())?;
            (Some((m.rows(), m.cols())), None)
        }
        LinearOperator::Blur(b) => {
            io::write_vector(dir.join("operator.txt"), &Array1::from(b.kernel().to_vec()))?;
            (Some((b.rows(), b.cols())), Some(b.kernel().to_vec()))
        }
        LinearOperator::Compose { .. } => {
            return Err(Error::Unsupported("saving composed operators".into()));
        }
    };
    io::write_vector(dir.join("y_obs.txt"), &problem.y_obs)?;
    if let Some(y) = &problem.y_exact {
        io::write_vector(dir.join("y_exact.txt"), y)?;
    }
    if let Some(w) = &problem.ground_truth {
        io::write_vector(dir.join("ground_truth.txt"), w)?;
    }
    let manifest = Manifest {
        family: problem.metadata.family,
        seed: problem.seed,
        delta: problem.delta,
        operator: problem.op.kind_name().to_string(),
        domain_dim: problem.op.domain_dim(),
        codomain_dim: problem.op.codomain_dim(),
        grid,
        kernel,
        metadata: problem.metadata.clone(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

/// Reads a directory written by [`save_problem`]. Test sets and dual
/// certificates are not stored.
pub fn load_problem(dir: impl AsRef<Path>) -> Result<InverseProblem> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    let op_path = dir.join("operator.txt");
    let op = match (m.operator.as_str(), m.grid) {
        ("dense", _) => LinearOperator::load_dense(&op_path)?,
        ("entry_mask", Some((r, c))) => LinearOperator::load_mask(&op_path, r, c)?,
        ("blur", Some((r, c))) => LinearOperator::Blur(Blur::new(r, c, io::read_vector(&op_path)?.to_vec())?),
        (kind, _) => return Err(Error::Unsupported(format!("operator kind {kind:?} in {}", path.display()))),
    };
    let optional = |name: &str| -> Result<Option<Array1<f64>>> {
        let p = dir.join(name);
        if p.exists() {
            io::read_vector(p).map(Some)
        } else {
            Ok(None)
        }
    };
    let y_obs = io::read_vector(dir.join("y_obs.txt"))?;
    check_len("stored observation", op.codomain_dim(), y_obs.len())?;
    Ok(InverseProblem {
        op,
        y_exact: optional("y_exact.txt")?,
        y_obs,
        delta: m.delta,
        ground_truth: optional("ground_truth.txt")?,
        dual_certificate: None,
        seed: m.seed,
        metadata: m.metadata,
        test: None,
    })
}

/// Seeded split of `0..len` into `(train, validation)` with
/// `round(len * fraction)` validation indices (at least one), both sorted.
pub fn holdout_split(len: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid(format!("holdout fraction must lie in (0, 1), got {fraction}")));
    }
    if len < 2 {
        return Err(invalid("holdout split needs at least two observations"));
    }
    let k = ((len as f64 * fraction).round() as usize).clamp(1, len - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut val = sample(&mut rng, len, k).into_vec();
    val.sort_unstable();
    let mut is_val = vec![false; len];
    for &i in &val {
        is_val[i] = true;
    }
    let train = (0..len).filter(|&i| !is_val[i]).collect();
    Ok((train, val))
}

/// Additive noise with standard deviation `std` (helper for callers building
/// their own problems).
pub fn gaussian_noise(len: usize, std: f64, seed: u64) -> Result<Array1<f64>> {
    let dist = Normal::new(0.0, std).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..len).map(|_| dist.sample(&mut rng)).collect())
}
