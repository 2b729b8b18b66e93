//! Tikhonov baseline: `min_w ||y - Xw||^2 + lambda R(w)` by FISTA, solved over
//! a geometric grid of `lambda` with warm restarts, then picked by holdout.
//!
//! The smooth part is `||y - Xw||^2 + (lambda alpha / 2) ||w||^2` and the prox
//! is taken on `lambda F`, so every penalty reuses its closed-form prox.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linops::{op_norm_default, LinearOperator};
use crate::regularizers::{nuclear, Penalty, Regularizer};
use crate::solvers::{DIVERGENCE_LIMIT, NORM_SAFETY_FACTOR};

/// Entries with magnitude at or below this are outside the refit support.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// Ridge added to the refit normal equations.
pub const REFIT_JITTER: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FistaResult {
    pub w: Array1<f64>,
    pub iterations: usize,
    /// `||y - Xw||^2 + lambda R(w)` at the returned point.
    pub objective: f64,
    /// The same at `w_init`.
    pub initial_objective: f64,
    /// Whether the step-length test fired before `max_iter`.
    pub converged: bool,
}

struct Problem<'a> {
    op: &'a LinearOperator,
    y: ArrayView1<'a, f64>,
    lambda: f64,
    alpha: f64,
}

impl Problem<'_> {
    fn objective(&self, w: &Array1<f64>, penalty_value: f64) -> Result<f64> {
        let r = self.op.apply(w.view())? - self.y;
        Ok(r.dot(&r) + self.lambda * (penalty_value + 0.5 * self.alpha * w.dot(w)))
    }

    fn gradient(&self, w: &Array1<f64>) -> Result<Array1<f64>> {
        let r = self.op.apply(w.view())? - self.y;
        let mut g = self.op.adjoint(r.view())? * 2.0;
        g.scaled_add(self.lambda * self.alpha, w);
        Ok(g)
    }
}

/// FISTA from `w_init`, with `||X||` estimated by the power method.
pub fn fista_solve(
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    reg: &mut Regularizer,
    lambda: f64,
    w_init: ArrayView1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<FistaResult> {
    let norm = op_norm_default(op)?.value;
    fista_solve_with_norm(op, y_obs, reg, lambda, w_init, tol, max_iter, norm)
}

/// [`fista_solve`] with a known operator norm estimate.
///
/// An accelerated step that raises the objective is replaced by a plain
/// proximal step from the current point, and the momentum restarts.
#[allow(clippy::too_many_arguments)]
pub fn fista_solve_with_norm(
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    reg: &mut Regularizer,
    lambda: f64,
    w_init: ArrayView1<f64>,
    tol: f64,
    max_iter: usize,
    x_norm: f64,
) -> Result<FistaResult> {
    check_len("observation", op.codomain_dim(), y_obs.len())?;
    check_len("initial point", op.domain_dim(), w_init.len())?;
    check_finite("observation", y_obs.iter())?;
    check_finite("initial point", w_init.iter())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let alpha = reg.alpha();
    let pb = Problem {
        op,
        y: y_obs,
        lambda,
        alpha,
    };
    let n = NORM_SAFETY_FACTOR * x_norm;
    let lip = 2.0 * n * n + lambda * alpha;
    let tau = lambda / lip;

    let prox_step = |reg: &mut Regularizer, at: &Array1<f64>, k: usize| -> Result<(Array1<f64>, f64)> {
        let mut x = at.clone();
        x.scaled_add(-1.0 / lip, &pb.gradient(at)?);
        let p = reg.prox_scaled(x.view(), tau, k)?;
        Ok((p.point, p.penalty_value))
    };

    let mut w = w_init.to_owned();
    let initial_objective = pb.objective(&w, reg.penalty_value(w.view())?)?;
    let mut obj = initial_objective;
    let mut extrap = w.clone();
    let mut theta = 1.0_f64;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let (mut next, mut pen) = prox_step(reg, &extrap, iterations)?;
        let mut next_obj = pb.objective(&next, pen)?;
        let mut restarted = false;
        if next_obj > obj {
            (next, pen) = prox_step(reg, &w, iterations)?;
            next_obj = pb.objective(&next, pen)?;
            restarted = true;
        }
        if !next_obj.is_finite() || next.dot(&next).sqrt() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: iterations,
                reason: "FISTA iterate left the finite range".into(),
            });
        }
        let diff = &next - &w;
        let step = diff.dot(&diff).sqrt();

        if next_obj <= obj {
            if restarted {
                theta = 1.0;
                extrap = next.clone();
            } else {
                let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
                extrap = &next + &(&diff * ((theta - 1.0) / theta_next));
                theta = theta_next;
            }
            w = next;
            obj = next_obj;
        } else {
            // inexact prox: keep the point, drop the momentum
            theta = 1.0;
            extrap = w.clone();
        }
        if step < tol {
            converged = true;
            break;
        }
    }

    Ok(FistaResult {
        w,
        iterations,
        objective: obj,
        initial_objective,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Largest `lambda`; `None` picks [`default_lambda0`].
    pub lambda0: Option<f64>,
    pub grid_factor: f64,
    pub num_lambdas: usize,
    /// Inner stopping tolerance is `inner_tol_scale * delta`.
    pub inner_tol_scale: f64,
    pub inner_max_iter: usize,
    pub delta: f64,
}

impl PathConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            lambda0: None,
            grid_factor: 0.5,
            num_lambdas: 20,
            inner_tol_scale: 1e-3,
            inner_max_iter: 5000,
            delta,
        }
    }

    pub fn inner_tol(&self) -> f64 {
        self.inner_tol_scale * self.delta
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.grid_factor > 0.0 && self.grid_factor < 1.0) {
            return bad(format!("grid factor must lie in (0, 1), got {}", self.grid_factor));
        }
        if self.num_lambdas == 0 || self.inner_max_iter == 0 {
            return bad("grid size and inner iteration cap must be positive".into());
        }
        if !(self.inner_tol() > 0.0 && self.inner_tol().is_finite()) {
            return bad(format!("inner tolerance must be positive, got {}", self.inner_tol()));
        }
        if let Some(l) = self.lambda0 {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("lambda0 must be positive, got {l}"));
            }
        }
        Ok(())
    }
}

/// A `lambda` at which the penalized solution is (numerically) zero:
/// `2 ||X^T y||_inf` for l1, `2 ||X^T y||_op` for the nuclear norm, and for
/// the other penalties the value that forces `||w|| <= tol`.
pub fn default_lambda0(
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    reg: &Regularizer,
    tol: f64,
) -> Result<f64> {
    let g = op.adjoint(y_obs)?;
    let lambda = match *reg.penalty() {
        Penalty::L1 => 2.0 * g.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Penalty::Nuclear { rows, cols } => {
            2.0 * nuclear::singular_values(g.view(), rows, cols)?.first().copied().unwrap_or(0.0)
        }
        Penalty::Zero | Penalty::Tv { .. } => 2.0 * g.dot(&g).sqrt() / (reg.alpha() * tol),
    };
    Ok(if lambda > 0.0 { lambda } else { 1.0 })
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub w: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    /// Decreasing `lambda`.
    pub points: Vec<PathPoint>,
    pub total_iterations: usize,
    pub selected: Option<usize>,
    /// Least-squares refit on the support of the selected solution.
    pub refit: Option<Array1<f64>>,
    /// The selected solution had no support, so the refit is zero.
    pub refit_empty_support: bool,
    /// The first solution is not (numerically) the minimizer of `R`, so
    /// `lambda0` was too small.
    pub lambda0_warning: bool,
}

impl PathResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    /// The selected estimate: the refit if present, else the selected solution.
    pub fn estimate(&self) -> Option<&Array1<f64>> {
        self.refit
            .as_ref()
            .or_else(|| self.selected.map(|i| &self.points[i].w))
    }

    /// CSV with columns `lambda, inner_iters, validation_score, selected`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# iterreg-path v1")?;
        writeln!(out, "lambda,inner_iters,validation_score,selected")?;
        for (i, p) in self.points.iter().enumerate() {
            let score = p.validation.map(|v| format!("{v:e}")).unwrap_or_default();
            let sel = u8::from(self.selected == Some(i));
            writeln!(out, "{:e},{},{score},{sel}", p.lambda, p.iterations)?;
        }
        Ok(())
    }
}

/// Solves along `lambda_i = lambda0 * grid_factor^i`, each solve warm-started
/// at the previous solution.
pub fn solve_path(
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: &PathConfig,
) -> Result<PathResult> {
    cfg.validate()?;
    let tol = cfg.inner_tol();
    let lambda0 = match cfg.lambda0 {
        Some(l) => l,
        None => default_lambda0(op, y_obs, reg, tol)?,
    };
    let norm = op_norm_default(op)?.value;
    let mut w = Array1::zeros(op.domain_dim());
    let mut points = Vec::with_capacity(cfg.num_lambdas);
    let mut total = 0;
    for i in 0..cfg.num_lambdas {
        let lambda = lambda0 * cfg.grid_factor.powi(i as i32);
        let r = fista_solve_with_norm(op, y_obs, reg, lambda, w.view(), tol, cfg.inner_max_iter, norm)?;
        total += r.iterations;
        w = r.w;
        points.push(PathPoint {
            lambda,
            w: w.clone(),
            iterations: r.iterations,
            converged: r.converged,
            validation: None,
        });
    }
    let first = &points[0].w;
    let lambda0_warning = first.dot(first).sqrt() > tol;
    Ok(PathResult {
        points,
        total_iterations: total,
        selected: None,
        refit: None,
        refit_empty_support: false,
        lambda0_warning,
    })
}

/// Indices `j` with `|w_j| > SUPPORT_THRESHOLD`.
pub fn support(w: ArrayView1<f64>) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter_map(|(j, v)| (v.abs() > SUPPORT_THRESHOLD).then_some(j))
        .collect()
}

/// Least squares restricted to the support of `w`, through the normal
/// equations with a small ridge. `None` when the support is empty.
pub fn refit_least_squares(
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    w: ArrayView1<f64>,
) -> Result<Option<Array1<f64>>> {
    check_len("refit point", op.domain_dim(), w.len())?;
    let supp = support(w);
    if supp.is_empty() {
        return Ok(None);
    }
    let n = op.codomain_dim();
    let mut cols = DMatrix::zeros(n, supp.len());
    let mut e = Array1::zeros(op.domain_dim());
    for (k, &j) in supp.iter().enumerate() {
        e[j] = 1.0;
        let col = op.apply(e.view())?;
        e[j] = 0.0;
        for i in 0..n {
            cols[(i, k)] = col[i];
        }
    }
    let y = DVector::from_iterator(n, y_obs.iter().copied());
    let mut gram = cols.transpose() * &cols;
    for k in 0..supp.len() {
        gram[(k, k)] += REFIT_JITTER;
    }
    let rhs = cols.transpose() * y;
    let coef = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .ok_or_else(|| Error::InvalidArgument("refit normal equations are singular".into()))?;
    let mut out = Array1::zeros(op.domain_dim());
    for (k, &j) in supp.iter().enumerate() {
        out[j] = coef[k];
    }
    Ok(Some(out))
}

/// Scores every grid point (after the refit when `refit` is set) and selects
/// the lowest score, the larger `lambda` on ties.
pub fn select_and_refit(
    mut path: PathResult,
    mut validation: impl FnMut(&Array1<f64>) -> f64,
    refit: bool,
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
) -> Result<PathResult> {
    if path.points.is_empty() {
        return Err(Error::InvalidArgument("empty regularization path".into()));
    }
    let mut best: Option<(usize, f64, Option<Array1<f64>>)> = None;
    for (i, p) in path.points.iter_mut().enumerate() {
        let candidate = if refit {
            Some(refit_least_squares(op, y_obs, p.w.view())?.unwrap_or_else(|| Array1::zeros(p.w.len())))
        } else {
            None
        };
        let score = validation(candidate.as_ref().unwrap_or(&p.w));
        p.validation = Some(score);
        if !score.is_nan() && best.as_ref().is_none_or(|b| score < b.1) {
            best = Some((i, score, candidate));
        }
    }
    let (idx, _, fitted) = best.ok_or_else(|| Error::InvalidArgument("every validation score is NaN".into()))?;
    path.selected = Some(idx);
    path.refit_empty_support = refit && support(path.points[idx].w.view()).is_empty();
    path.refit = fitted;
    Ok(path)
}
