//! Dual gradient descent (DGD) and its accelerated variant (ADGD).
//!
//! Both run gradient steps on the dual `D(v) = R*(-X^T v) + <y, v>` with step
//! `gamma = alpha / ||X||^2`. The primal iterate at step t is
//! `w_t = prox_{F/alpha}(-X^T v_t / alpha)`; for `F = 0` DGD is the Landweber
//! iteration. Stopped early, the iterates regularize the noisy problem.

use std::io::Write;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linops::{op_norm_default, LinearOperator};
use crate::regularizers::{conjugate_from_prox, Regularizer};

/// The estimated operator norm is inflated by this factor before forming the
/// step size, since the power method estimates from below.
pub const NORM_SAFETY_FACTOR: f64 = 1.01;

/// Runs abort once the dual iterate exceeds this norm.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Dgd,
    Adgd,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Dgd => "dgd",
            Variant::Adgd => "adgd",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dgd" => Ok(Variant::Dgd),
            "adgd" => Ok(Variant::Adgd),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// `alpha / (NORM_SAFETY_FACTOR * ||X||)^2` with `||X||` from the power method.
    Auto,
    /// Explicit step, for controlled experiments.
    Fixed(f64),
}

/// `alpha / (NORM_SAFETY_FACTOR * norm)^2`.
pub fn step_size(alpha: f64, norm: f64) -> f64 {
    let n = NORM_SAFETY_FACTOR * norm;
    alpha / (n * n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Last iteration index; the trace covers `t = 0..=max_iterations`.
    pub max_iterations: usize,
    pub step: StepSize,
    /// Record every k-th iteration (the last one is always recorded).
    pub record_every: usize,
    /// Keep copies of the iterates in recorded entries.
    pub store_iterates: bool,
    pub track_dual_objective: bool,
}

impl SolverConfig {
    pub fn new(variant: Variant, max_iterations: usize) -> Self {
        Self {
            variant,
            max_iterations,
            step: StepSize::Auto,
            record_every: 1,
            store_iterates: false,
            track_dual_objective: true,
        }
    }

    pub fn with_step(mut self, gamma: f64) -> Self {
        self.step = StepSize::Fixed(gamma);
        self
    }

    pub fn storing_iterates(mut self) -> Self {
        self.store_iterates = true;
        self
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn without_dual_objective(mut self) -> Self {
        self.track_dual_objective = false;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        if let StepSize::Fixed(g) = self.step {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// Iterates passed to metric hooks.
pub struct IterateView<'a> {
    pub t: usize,
    /// `w_t`.
    pub primal: ArrayView1<'a, f64>,
    /// Running mean `u_t` (DGD only).
    pub averaged: Option<ArrayView1<'a, f64>>,
    /// `v_t`.
    pub dual: ArrayView1<'a, f64>,
}

impl IterateView<'_> {
    /// The iterate that carries the error guarantee: the average for DGD, the
    /// primal point for ADGD.
    pub fn output(&self) -> ArrayView1<'_, f64> {
        self.averaged.unwrap_or(self.primal)
    }
}

/// A named per-iteration evaluator, called at every recorded iteration.
pub struct Metric<'a> {
    pub name: String,
    eval: Box<dyn FnMut(&IterateView) -> f64 + 'a>,
}

impl<'a> Metric<'a> {
    pub fn new(name: impl Into<String>, eval: impl FnMut(&IterateView) -> f64 + 'a) -> Self {
        Self {
            name: name.into(),
            eval: Box::new(eval),
        }
    }
}

/// Copies of the iterates at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterates {
    pub primal: Array1<f64>,
    pub averaged: Option<Array1<f64>>,
    pub dual: Array1<f64>,
    /// ADGD gradient-step point `z_t`.
    pub z: Option<Array1<f64>>,
    /// ADGD prox at the extrapolated dual point, `r_t`.
    pub r: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// `D(v_t)`.
    pub dual_objective: Option<f64>,
    /// `theta_t` (ADGD).
    pub theta: Option<f64>,
    /// Values of the metric hooks, in hook order.
    pub metrics: Vec<f64>,
    pub iterates: Option<Iterates>,
}

impl TraceRecord {
    /// The guarantee-carrying iterate, when iterates were stored.
    pub fn output(&self) -> Option<&Array1<f64>> {
        self.iterates
            .as_ref()
            .map(|it| it.averaged.as_ref().unwrap_or(&it.primal))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub variant: Variant,
    pub alpha: f64,
    pub gamma: f64,
    /// Norm estimate behind `gamma` (`None` for a fixed step).
    pub operator_norm: Option<f64>,
    pub metric_names: Vec<String>,
    pub records: Vec<TraceRecord>,
    pub final_primal: Array1<f64>,
    pub final_averaged: Option<Array1<f64>>,
    pub final_dual: Array1<f64>,
    /// Number of primal iterates computed, `max_iterations + 1`.
    pub iterations: usize,
    /// Inner iterations spent inside inexact prox evaluations.
    pub inner_iterations: usize,
}

impl SolverTrace {
    pub fn record_at(&self, t: usize) -> Option<&TraceRecord> {
        self.records
            .binary_search_by_key(&t, |r| r.t)
            .ok()
            .map(|i| &self.records[i])
    }

    /// `(t, value)` pairs of a metric hook.
    pub fn metric(&self, name: &str) -> Option<Vec<(usize, f64)>> {
        let k = self.metric_names.iter().position(|n| n == name)?;
        Some(self.records.iter().map(|r| (r.t, r.metrics[k])).collect())
    }

    /// The regularized output after the last iteration.
    pub fn final_output(&self) -> &Array1<f64> {
        self.final_averaged.as_ref().unwrap_or(&self.final_primal)
    }

    /// CSV with columns `t, dual_objective, [theta,] <metrics...>`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# iterreg-trace v1 variant={}", self.variant.name())?;
        let mut header = vec!["t".to_string(), "dual_objective".to_string()];
        let adgd = self.variant == Variant::Adgd;
        if adgd {
            header.push("theta".into());
        }
        header.extend(self.metric_names.iter().cloned());
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![
                r.t.to_string(),
                r.dual_objective.map(|d| format!("{d:e}")).unwrap_or_default(),
            ];
            if adgd {
                row.push(r.theta.map(|d| format!("{d:e}")).unwrap_or_default());
            }
            row.extend(r.metrics.iter().map(|m| format!("{m:e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `theta_{t+1} = (1 + sqrt(1 + 4 theta_t^2)) / 2`.
pub fn next_theta(theta: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0
}

/// `theta_0, ..., theta_t_max` with `theta_0 = 1`.
pub fn theta_sequence(t_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t_max + 1);
    let mut th = 1.0;
    out.push(th);
    for _ in 0..t_max {
        th = next_theta(th);
        out.push(th);
    }
    out
}

fn resolve_step(op: &LinearOperator, alpha: f64, step: StepSize) -> Result<(f64, Option<f64>)> {
    match step {
        StepSize::Fixed(g) => Ok((g, None)),
        StepSize::Auto => {
            let est = op_norm_default(op)?;
            if est.zero_operator || est.value == 0.0 {
                return Err(Error::InvalidArgument("forward operator is zero".into()));
            }
            Ok((step_size(alpha, est.value), Some(est.value)))
        }
    }
}

fn guard(v: &Array1<f64>, iteration: usize) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged {
            iteration,
            reason: "non-finite dual iterate".into(),
        });
    }
    let n = v.dot(v).sqrt();
    if n > DIVERGENCE_LIMIT {
        return Err(Error::Diverged {
            iteration,
            reason: format!("dual iterate norm {n:.3e} exceeds {DIVERGENCE_LIMIT:e}"),
        });
    }
    Ok(())
}

fn is_recorded(cfg: &SolverConfig, t: usize) -> bool {
    t.is_multiple_of(cfg.record_every) || t == cfg.max_iterations
}

/// Runs the configured variant, evaluating `metrics` at recorded iterations.
pub fn run(
    op: &LinearOperator,
    y: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: &SolverConfig,
    metrics: &mut [Metric<'_>],
) -> Result<SolverTrace> {
    cfg.validate()?;
    check_len("observation", op.codomain_dim(), y.len())?;
    check_finite("observation", y.iter())?;
    if let Some(d) = reg.penalty().dim() {
        check_len("regularizer dimension", d, op.domain_dim())?;
    }
    let (gamma, norm) = resolve_step(op, reg.alpha(), cfg.step)?;
    match cfg.variant {
        Variant::Dgd => dgd_loop(op, y, reg, cfg, gamma, norm, metrics),
        Variant::Adgd => adgd_loop(op, y, reg, cfg, gamma, norm, metrics),
    }
}

/// DGD on noisy observations, no metric hooks.
pub fn run_dgd(
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: &SolverConfig,
) -> Result<SolverTrace> {
    if cfg.variant != Variant::Dgd {
        return Err(Error::InvalidArgument("run_dgd needs a DGD config".into()));
    }
    run(op, y_obs, reg, cfg, &mut [])
}

/// ADGD on noisy observations, no metric hooks.
pub fn run_adgd(
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: &SolverConfig,
) -> Result<SolverTrace> {
    if cfg.variant != Variant::Adgd {
        return Err(Error::InvalidArgument("run_adgd needs an ADGD config".into()));
    }
    run(op, y_obs, reg, cfg, &mut [])
}

/// The same iteration driven by exact data; only used to analyse runs.
pub fn run_reference(
    op: &LinearOperator,
    y_exact: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: &SolverConfig,
) -> Result<SolverTrace> {
    run(op, y_exact, reg, cfg, &mut [])
}

fn dgd_loop(
    op: &LinearOperator,
    y: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: &SolverConfig,
    gamma: f64,
    norm: Option<f64>,
    metrics: &mut [Metric<'_>],
) -> Result<SolverTrace> {
    let alpha = reg.alpha();
    let p = op.domain_dim();
    let mut v = Array1::<f64>::zeros(op.codomain_dim());
    let mut avg = Array1::<f64>::zeros(p);
    let mut w = Array1::<f64>::zeros(p);
    let mut records = Vec::new();
    let mut inner = 0;

    for t in 0..=cfg.max_iterations {
        let s = -op.adjoint(v.view())?;
        let prox = reg.prox_at((&s / alpha).view(), t)?;
        inner += prox.inner_iterations;
        w = prox.point.clone();
        let step = &w - &avg;
        avg.scaled_add(1.0 / (t as f64 + 1.0), &step);

        if is_recorded(cfg, t) {
            let dual_objective = cfg
                .track_dual_objective
                .then(|| conjugate_from_prox(alpha, s.view(), &prox) + y.dot(&v));
            let view = IterateView {
                t,
                primal: w.view(),
                averaged: Some(avg.view()),
                dual: v.view(),
            };
            let values = metrics.iter_mut().map(|m| (m.eval)(&view)).collect();
            records.push(TraceRecord {
                t,
                dual_objective,
                theta: None,
                metrics: values,
                iterates: cfg.store_iterates.then(|| Iterates {
                    primal: w.clone(),
                    averaged: Some(avg.clone()),
                    dual: v.clone(),
                    z: None,
                    r: None,
                }),
            });
        }

        if t == cfg.max_iterations {
            break;
        }
        let resid = op.apply(w.view())? - y;
        v.scaled_add(gamma, &resid);
        guard(&v, t + 1)?;
    }

    Ok(SolverTrace {
        variant: Variant::Dgd,
        alpha,
        gamma,
        operator_norm: norm,
        metric_names: metrics.iter().map(|m| m.name.clone()).collect(),
        records,
        final_primal: w,
        final_averaged: Some(avg),
        final_dual: v,
        iterations: cfg.max_iterations + 1,
        inner_iterations: inner,
    })
}

fn adgd_loop(
    op: &LinearOperator,
    y: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: &SolverConfig,
    gamma: f64,
    norm: Option<f64>,
    metrics: &mut [Metric<'_>],
) -> Result<SolverTrace> {
    let alpha = reg.alpha();
    let n = op.codomain_dim();
    let mut v = Array1::<f64>::zeros(n);
    // z holds the previous gradient-step point z_{t-1}; z_{-1} = z_0 = v_0 = 0
    let mut z = Array1::<f64>::zeros(n);
    let mut theta = 1.0;
    let mut w = Array1::<f64>::zeros(op.domain_dim());
    let mut records = Vec::new();
    let mut inner = 0;

    for t in 0..=cfg.max_iterations {
        let sz = -op.adjoint(z.view())?;
        let pw = reg.prox_at((&sz / alpha).view(), t)?;
        inner += pw.inner_iterations;
        w = pw.point;

        let sv = -op.adjoint(v.view())?;
        let pr = reg.prox_at((&sv / alpha).view(), t)?;
        inner += pr.inner_iterations;

        let mut z_next = v.clone();
        z_next.scaled_add(gamma, &(op.apply(pr.point.view())? - y));
        guard(&z_next, t)?;
        let theta_next = next_theta(theta);
        let mut v_next = z_next.clone();
        v_next.scaled_add((theta - 1.0) / theta_next, &(&z_next - &z));

        if is_recorded(cfg, t) {
            let dual_objective = cfg
                .track_dual_objective
                .then(|| conjugate_from_prox(alpha, sv.view(), &pr) + y.dot(&v));
            let view = IterateView {
                t,
                primal: w.view(),
                averaged: None,
                dual: v.view(),
            };
            let values = metrics.iter_mut().map(|m| (m.eval)(&view)).collect();
            records.push(TraceRecord {
                t,
                dual_objective,
                theta: Some(theta),
                metrics: values,
                iterates: cfg.store_iterates.then(|| Iterates {
                    primal: w.clone(),
                    averaged: None,
                    dual: v.clone(),
                    z: Some(z_next.clone()),
                    r: Some(pr.point.clone()),
                }),
            });
        }

        if t == cfg.max_iterations {
            break;
        }
        z = z_next;
        v = v_next;
        theta = theta_next;
        guard(&v, t + 1)?;
    }

    Ok(SolverTrace {
        variant: Variant::Adgd,
        alpha,
        gamma,
        operator_norm: norm,
        metric_names: metrics.iter().map(|m| m.name.clone()).collect(),
        records,
        final_primal: w,
        final_averaged: None,
        final_dual: v,
        iterations: cfg.max_iterations + 1,
        inner_iterations: inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::Penalty;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(seed: u64, n: usize, p: usize) -> (LinearOperator, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        (LinearOperator::Dense(m), y)
    }

    #[test]
    fn theta_values() {
        let th = theta_sequence(2);
        assert_eq!(th[0], 1.0);
        assert!((th[1] - 1.618_033_988_749_895).abs() < 1e-15);
        assert!((th[2] - 2.193_527_085_331_054_6).abs() < 1e-12);
    }

    #[test]
    fn dgd_scalar_hand_simulation() {
        let op = LinearOperator::identity(1);
        let y = array![1.0];
        let mut reg = Regularizer::zero(1.0).unwrap();
        let cfg = SolverConfig::new(Variant::Dgd, 5).with_step(1.0).storing_iterates();
        let trace = run_dgd(&op, y.view(), &mut reg, &cfg).unwrap();
        let it = |t: usize| trace.record_at(t).unwrap().iterates.clone().unwrap();
        assert_eq!(it(0).primal, array![0.0]);
        assert_eq!(it(1).dual, array![-1.0]);
        for t in 1..=5 {
            assert_eq!(it(t).primal, array![1.0]);
        }
        assert_eq!(trace.records.len(), 6);
    }

    #[test]
    fn zero_observation_stays_at_origin() {
        let (op, _) = random_problem(1, 6, 9);
        let y = Array1::zeros(6);
        for pen in [Penalty::Zero, Penalty::L1] {
            for variant in [Variant::Dgd, Variant::Adgd] {
                let mut reg = Regularizer::new(0.5, pen).unwrap();
                let trace = run(&op, y.view(), &mut reg, &SolverConfig::new(variant, 20), &mut []).unwrap();
                assert!(trace.final_primal.iter().all(|&x| x == 0.0));
                assert!(trace.final_dual.iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn dgd_dual_update_is_reconstructible() {
        let (op, y) = random_problem(2, 8, 15);
        let mut reg = Regularizer::elastic_net(0.6).unwrap();
        let cfg = SolverConfig::new(Variant::Dgd, 60).storing_iterates();
        let trace = run_dgd(&op, y.view(), &mut reg, &cfg).unwrap();
        let g = trace.gamma;
        for pair in trace.records.windows(2) {
            let a = pair[0].iterates.as_ref().unwrap();
            let b = pair[1].iterates.as_ref().unwrap();
            let expected = &a.dual + &((op.apply(a.primal.view()).unwrap() - &y) * g);
            let err = (&expected - &b.dual).mapv(f64::abs).sum();
            assert!(err < 1e-12);
            // (t+1) u_t - t u_{t-1} = w_t
            let t = pair[1].t as f64;
            let lhs = b.averaged.as_ref().unwrap() * (t + 1.0) - a.averaged.as_ref().unwrap() * t;
            assert!((&lhs - &b.primal).mapv(f64::abs).sum() < 1e-10);
        }
    }

    #[test]
    fn dgd_dual_objective_is_monotone() {
        let (op, y) = random_problem(3, 10, 25);
        for pen in [Penalty::Zero, Penalty::L1] {
            let mut reg = Regularizer::new(0.9, pen).unwrap();
            let trace = run_dgd(&op, y.view(), &mut reg, &SolverConfig::new(Variant::Dgd, 300)).unwrap();
            for pair in trace.records.windows(2) {
                let (a, b) = (pair[0].dual_objective.unwrap(), pair[1].dual_objective.unwrap());
                assert!(b <= a + 1e-10, "{} -> {}", a, b);
            }
        }
    }

    #[test]
    fn step_size_respects_safety_factor() {
        let (op, y) = random_problem(4, 5, 7);
        let mut reg = Regularizer::zero(2.0).unwrap();
        let trace = run_dgd(&op, y.view(), &mut reg, &SolverConfig::new(Variant::Dgd, 1)).unwrap();
        let norm = trace.operator_norm.unwrap();
        assert!(trace.gamma <= 2.0 / (norm * norm));
        assert!((trace.gamma - 2.0 / (1.0201 * norm * norm)).abs() < 1e-15);
    }

    #[test]
    fn landweber_special_case() {
        let (op, y) = random_problem(5, 20, 50);
        let alpha = 1.0;
        let mut reg = Regularizer::zero(alpha).unwrap();
        let cfg = SolverConfig::new(Variant::Dgd, 100).storing_iterates();
        let trace = run_dgd(&op, y.view(), &mut reg, &cfg).unwrap();
        let g = trace.gamma;
        let LinearOperator::Dense(m) = &op else { unreachable!() };
        let mut w = Array1::<f64>::zeros(50);
        for t in 0..=100 {
            let rec = trace.record_at(t).unwrap().iterates.as_ref().unwrap();
            let diff = (&rec.primal - &w).mapv(f64::abs).fold(0.0_f64, |a, &b| a.max(b));
            assert!(diff <= 1e-12, "t={t}: {diff}");
            let resid = m.dot(&w) - &y;
            w = &w - &(m.t().dot(&resid) * (g / alpha));
        }
    }

    #[test]
    fn adgd_first_iterate_and_limit() {
        let op = LinearOperator::identity(1);
        let y = array![1.0];
        let mut reg = Regularizer::zero(1.0).unwrap();
        let cfg = SolverConfig::new(Variant::Adgd, 60).storing_iterates();
        let trace = run_adgd(&op, y.view(), &mut reg, &cfg).unwrap();
        assert_eq!(trace.record_at(0).unwrap().iterates.as_ref().unwrap().primal, array![0.0]);
        assert!((trace.final_primal[0] - 1.0).abs() < 1e-3);
        assert_eq!(trace.records[0].theta, Some(1.0));
    }

    #[test]
    fn adgd_records_theta_within_bounds() {
        let (op, y) = random_problem(6, 6, 12);
        let mut reg = Regularizer::elastic_net(1.0).unwrap();
        let trace = run_adgd(&op, y.view(), &mut reg, &SolverConfig::new(Variant::Adgd, 200)).unwrap();
        for r in &trace.records {
            let th = r.theta.unwrap();
            let t = r.t as f64;
            assert!((t + 1.0) / 2.0 <= th && th <= t + 1.0);
        }
    }

    #[test]
    fn reference_equals_noisy_on_same_data() {
        let (op, y) = random_problem(7, 9, 14);
        for variant in [Variant::Dgd, Variant::Adgd] {
            let cfg = SolverConfig::new(variant, 50).storing_iterates();
            let mut r1 = Regularizer::elastic_net(0.4).unwrap();
            let mut r2 = Regularizer::elastic_net(0.4).unwrap();
            let a = run(&op, y.view(), &mut r1, &cfg, &mut []).unwrap();
            let b = run_reference(&op, y.view(), &mut r2, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn variant_mismatch_and_bad_config() {
        let (op, y) = random_problem(8, 3, 3);
        let mut reg = Regularizer::zero(1.0).unwrap();
        assert!(run_dgd(&op, y.view(), &mut reg, &SolverConfig::new(Variant::Adgd, 3)).is_err());
        assert!(run_adgd(&op, y.view(), &mut reg, &SolverConfig::new(Variant::Dgd, 3)).is_err());
        let bad = SolverConfig::new(Variant::Dgd, 3).recording_every(0);
        assert!(run_dgd(&op, y.view(), &mut reg, &bad).is_err());
        assert!(matches!(
            run_dgd(&op, array![1.0].view(), &mut reg, &SolverConfig::new(Variant::Dgd, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn oversized_step_diverges_with_iteration_index() {
        let (op, y) = random_problem(9, 5, 5);
        let mut reg = Regularizer::zero(1.0).unwrap();
        let cfg = SolverConfig::new(Variant::Dgd, 10_000).with_step(50.0);
        match run_dgd(&op, y.view(), &mut reg, &cfg) {
            Err(Error::Diverged { iteration, .. }) => assert!(iteration > 0),
            other => panic!("expected divergence, got {:?}", other.map(|t| t.iterations)),
        }
    }

    #[test]
    fn metrics_and_csv() {
        let (op, y) = random_problem(10, 4, 6);
        let mut reg = Regularizer::elastic_net(1.0).unwrap();
        let cfg = SolverConfig::new(Variant::Adgd, 9).recording_every(4);
        let mut hooks = [Metric::new("norm", |it: &IterateView| it.primal.dot(&it.primal).sqrt())];
        let trace = run(&op, y.view(), &mut reg, &cfg, &mut hooks).unwrap();
        let ts: Vec<usize> = trace.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 4, 8, 9]);
        assert_eq!(trace.metric("norm").unwrap().len(), 4);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# iterreg-trace v1"));
        assert_eq!(lines[1], "t,dual_objective,theta,norm");
        assert_eq!(lines.len(), 6);
    }
}
