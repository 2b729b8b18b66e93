//! Strongly convex penalties `R = F + (alpha/2) ||.||^2`, their proximity
//! operators, and the conjugate calculus used by the dual iterations.
//!
//! With `env(v) = min_u F(u) + (alpha/2) ||u - v/alpha||^2` the conjugate is
//! `R*(v) = ||v||^2 / (2 alpha) - env(v)` and its gradient is
//! `prox_{F/alpha}(v / alpha)`.

pub mod nuclear;
pub mod tv;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linops::LinearOperator;

/// Default number of inner dual steps per TV prox.
pub const DEFAULT_TV_INNER_STEPS: usize = 20;

/// Inner-step budget of the TV prox as a function of the outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSchedule {
    Fixed(usize),
    /// `ceil(base * (1 + ln(1 + t)))` steps at outer iteration `t`.
    Growing { base: usize },
}

impl InnerSchedule {
    pub fn steps_at(&self, outer_iteration: usize) -> usize {
        match *self {
            InnerSchedule::Fixed(n) => n,
            InnerSchedule::Growing { base } => {
                (base as f64 * (1.0 + (1.0 + outer_iteration as f64).ln())).ceil() as usize
            }
        }
    }
}

impl Default for InnerSchedule {
    fn default() -> Self {
        InnerSchedule::Fixed(DEFAULT_TV_INNER_STEPS)
    }
}

/// The nonsmooth part `F` of the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    Zero,
    L1,
    /// Nuclear norm of the `rows x cols` matrix stored row-major.
    Nuclear { rows: usize, cols: usize },
    /// Isotropic total variation of the `rows x cols` image stored row-major.
    Tv {
        rows: usize,
        cols: usize,
        #[serde(default)]
        inner: InnerSchedule,
    },
}

impl Penalty {
    pub fn name(&self) -> &'static str {
        match self {
            Penalty::Zero => "zero",
            Penalty::L1 => "l1",
            Penalty::Nuclear { .. } => "nuclear",
            Penalty::Tv { .. } => "tv",
        }
    }

    /// Closed-form prox (everything but TV).
    pub fn is_exact(&self) -> bool {
        !matches!(self, Penalty::Tv { .. })
    }

    /// Required vector length, if the penalty fixes one.
    pub fn dim(&self) -> Option<usize> {
        match *self {
            Penalty::Nuclear { rows, cols } | Penalty::Tv { rows, cols, .. } => Some(rows * cols),
            _ => None,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        match self.dim() {
            Some(d) => check_len("penalty dimension", d, len),
            None => Ok(()),
        }
    }

    /// `F(u)`.
    pub fn value(&self, u: ArrayView1<f64>) -> Result<f64> {
        self.check_dim(u.len())?;
        Ok(match *self {
            Penalty::Zero => 0.0,
            Penalty::L1 => u.iter().map(|x| x.abs()).sum(),
            Penalty::Nuclear { rows, cols } => nuclear::singular_values(u, rows, cols)?.iter().sum(),
            Penalty::Tv { rows, cols, .. } => tv::value(u, rows, cols),
        })
    }
}

/// Componentwise `sign(x) max(|x| - tau, 0)`.
pub fn soft_threshold(x: ArrayView1<f64>, tau: f64) -> Array1<f64> {
    x.mapv(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// How accurately a prox point was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Precision {
    Exact,
    /// Estimated gap between the attained and the optimal prox objective.
    Inexact { gap: f64 },
}

impl Precision {
    pub fn is_exact(&self) -> bool {
        matches!(self, Precision::Exact)
    }
}

/// A prox evaluation.
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub point: Array1<f64>,
    pub inner_iterations: usize,
    pub precision: Precision,
    /// `F(point)`, produced as a by-product.
    pub penalty_value: f64,
}

/// Value of `R*` together with the precision of the prox behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateValue {
    pub value: f64,
    pub precision: Precision,
}

/// `R = F + (alpha/2) ||.||^2`.
///
/// A TV regularizer keeps the last inner dual variable as the warm start of
/// the next prox, so one solver run must own it exclusively.
#[derive(Debug, Clone)]
pub struct Regularizer {
    alpha: f64,
    penalty: Penalty,
    tv_warm: Option<Array1<f64>>,
}

impl Regularizer {
    pub fn new(alpha: f64, penalty: Penalty) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "strong convexity constant must be positive and finite, got {alpha}"
            )));
        }
        match penalty {
            Penalty::Nuclear { rows, cols } | Penalty::Tv { rows, cols, .. }
                if rows == 0 || cols == 0 =>
            {
                return Err(Error::InvalidArgument(format!(
                    "{} penalty needs a nonempty grid, got {rows}x{cols}",
                    penalty.name()
                )));
            }
            Penalty::Tv {
                inner: InnerSchedule::Fixed(0) | InnerSchedule::Growing { base: 0 },
                ..
            } => {
                return Err(Error::InvalidArgument(
                    "tv penalty needs at least one inner step".into(),
                ));
            }
            _ => {}
        }
        Ok(Self {
            alpha,
            penalty,
            tv_warm: None,
        })
    }

    pub fn zero(alpha: f64) -> Result<Self> {
        Self::new(alpha, Penalty::Zero)
    }

    pub fn elastic_net(alpha: f64) -> Result<Self> {
        Self::new(alpha, Penalty::L1)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn is_exact(&self) -> bool {
        self.penalty.is_exact()
    }

    /// Drops the TV warm start.
    pub fn reset(&mut self) {
        self.tv_warm = None;
    }

    /// `F(u)`.
    pub fn penalty_value(&self, u: ArrayView1<f64>) -> Result<f64> {
        self.penalty.value(u)
    }

    /// `R(u) = F(u) + (alpha/2) ||u||^2`.
    pub fn value(&self, u: ArrayView1<f64>) -> Result<f64> {
        Ok(self.penalty.value(u)? + 0.5 * self.alpha * u.dot(&u))
    }

    /// `argmin_u tau F(u) + 1/2 ||u - x||^2`, the building block of every prox
    /// in the crate. `outer_iteration` drives the TV inner schedule.
    pub fn prox_scaled(
        &mut self,
        x: ArrayView1<f64>,
        tau: f64,
        outer_iteration: usize,
    ) -> Result<ProxResult> {
        self.penalty.check_dim(x.len())?;
        check_finite("prox input", x.iter())?;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("prox scale must be >= 0, got {tau}")));
        }
        match self.penalty {
            Penalty::Zero => Ok(ProxResult {
                point: x.to_owned(),
                inner_iterations: 0,
                precision: Precision::Exact,
                penalty_value: 0.0,
            }),
            Penalty::L1 => {
                let point = soft_threshold(x, tau);
                let penalty_value = point.iter().map(|v| v.abs()).sum();
                Ok(ProxResult {
                    point,
                    inner_iterations: 0,
                    precision: Precision::Exact,
                    penalty_value,
                })
            }
            Penalty::Nuclear { rows, cols } => {
                let s = nuclear::shrink(x, rows, cols, tau)?;
                Ok(ProxResult {
                    point: s.point,
                    inner_iterations: 0,
                    precision: Precision::Exact,
                    penalty_value: s.nuclear_norm,
                })
            }
            Penalty::Tv { rows, cols, inner } => {
                if tau == 0.0 {
                    return Ok(ProxResult {
                        penalty_value: tv::value(x, rows, cols),
                        point: x.to_owned(),
                        inner_iterations: 0,
                        precision: Precision::Exact,
                    });
                }
                let steps = inner.steps_at(outer_iteration);
                let out = tv::denoise(x, rows, cols, tau, self.tv_warm.as_ref(), steps);
                self.tv_warm = Some(out.dual);
                Ok(ProxResult {
                    point: out.point,
                    inner_iterations: out.steps,
                    // gap of the tau-scaled objective, reported for F + (alpha/2)||.||^2
                    precision: Precision::Inexact { gap: out.gap / tau },
                    penalty_value: out.tv,
                })
            }
        }
    }

    /// `prox_{F/alpha}(w) = argmin_u F(u) + (alpha/2) ||u - w||^2`.
    pub fn prox(&mut self, w: ArrayView1<f64>) -> Result<ProxResult> {
        self.prox_at(w, 0)
    }

    /// [`Regularizer::prox`] at a given outer iteration of a solver run.
    pub fn prox_at(&mut self, w: ArrayView1<f64>, outer_iteration: usize) -> Result<ProxResult> {
        self.prox_scaled(w, 1.0 / self.alpha, outer_iteration)
    }

    /// `R*(v)` from the prox at `v / alpha`.
    pub fn conjugate_value(&mut self, v: ArrayView1<f64>) -> Result<ConjugateValue> {
        check_finite("conjugate argument", v.iter())?;
        let scaled = &v / self.alpha;
        let r = self.prox(scaled.view())?;
        Ok(ConjugateValue {
            value: conjugate_from_prox(self.alpha, v, &r),
            precision: r.precision,
        })
    }

    /// `grad R*(v) = prox_{F/alpha}(v / alpha)`.
    pub fn dual_gradient(&mut self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_finite("dual gradient argument", v.iter())?;
        let scaled = &v / self.alpha;
        Ok(self.prox(scaled.view())?.point)
    }
}

/// `R*(s)` given the prox evaluated at `s / alpha`.
pub(crate) fn conjugate_from_prox(alpha: f64, s: ArrayView1<f64>, r: &ProxResult) -> f64 {
    let mut dist = 0.0;
    for (u, si) in r.point.iter().zip(s.iter()) {
        let d = u - si / alpha;
        dist += d * d;
    }
    let envelope = r.penalty_value + 0.5 * alpha * dist;
    s.dot(&s) / (2.0 * alpha) - envelope
}

/// Dual objective `D(v) = R*(-X^T v) + <y, v>`.
pub fn dual_objective(
    reg: &mut Regularizer,
    op: &LinearOperator,
    y_obs: ArrayView1<f64>,
    v: ArrayView1<f64>,
) -> Result<f64> {
    check_len("dual objective observation", op.codomain_dim(), y_obs.len())?;
    let s = -op.adjoint(v)?;
    Ok(reg.conjugate_value(s.view())?.value + y_obs.dot(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn norm(x: &Array1<f64>) -> f64 {
        x.dot(x).sqrt()
    }

    /// Minimizes `|u| + (alpha/2)(u - w)^2` over a grid of step `h`.
    fn grid_prox_l1(w: f64, alpha: f64, h: f64) -> f64 {
        let lo = w.min(0.0) - 1.0;
        let steps = ((w.max(0.0) + 1.0 - lo) / h).ceil() as usize;
        (0..=steps)
            .map(|k| lo + k as f64 * h)
            .map(|u| (u, u.abs() + 0.5 * alpha * (u - w) * (u - w)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    fn closed_form_regs() -> Vec<Regularizer> {
        vec![
            Regularizer::zero(0.7).unwrap(),
            Regularizer::elastic_net(1.3).unwrap(),
            Regularizer::new(2.0, Penalty::Nuclear { rows: 3, cols: 4 }).unwrap(),
        ]
    }

    #[test]
    fn zero_prox_is_identity() {
        let mut r = Regularizer::zero(3.0).unwrap();
        let w = array![1.0, -4.0, 0.5];
        let p = r.prox(w.view()).unwrap();
        assert_eq!(p.point, w);
        assert!(p.precision.is_exact());
    }

    #[test]
    fn l1_prox_matches_grid_oracle() {
        let mut r = Regularizer::elastic_net(2.0).unwrap();
        let w = array![1.5, -0.2, 0.5];
        let p = r.prox(w.view()).unwrap();
        assert_eq!(p.point, array![1.0, 0.0, 0.0]);
        for (i, &wi) in w.iter().enumerate() {
            let g = grid_prox_l1(wi, 2.0, 1e-4);
            assert!((g - p.point[i]).abs() <= 1e-4, "{g} vs {}", p.point[i]);
        }
    }

    #[test]
    fn nuclear_diagonal_example() {
        let mut r = Regularizer::new(2.0, Penalty::Nuclear { rows: 3, cols: 3 }).unwrap();
        let w = array![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.2];
        let p = r.prox(w.view()).unwrap();
        let expected = array![2.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        assert!(norm(&(&p.point - &expected)) < 1e-12);
    }

    #[test]
    fn prox_rejects_bad_input() {
        let mut r = Regularizer::new(1.0, Penalty::Nuclear { rows: 2, cols: 2 }).unwrap();
        assert!(matches!(
            r.prox(array![1.0, 2.0, 3.0].view()),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut l1 = Regularizer::elastic_net(1.0).unwrap();
        assert!(matches!(
            l1.prox(array![f64::NAN].view()),
            Err(Error::NonFinite(_))
        ));
        assert!(Regularizer::new(0.0, Penalty::L1).is_err());
        assert!(Regularizer::new(-1.0, Penalty::Zero).is_err());
        assert!(Regularizer::new(
            1.0,
            Penalty::Tv { rows: 2, cols: 2, inner: InnerSchedule::Fixed(0) }
        )
        .is_err());
    }

    #[test]
    fn prox_satisfies_variational_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for mut reg in closed_form_regs() {
            let alpha = reg.alpha();
            for _ in 0..5 {
                let w = gauss(&mut rng, 12) * 1.5;
                let u = reg.prox(w.view()).unwrap().point;
                let obj = |x: &Array1<f64>| {
                    let d = x - &w;
                    reg.penalty_value(x.view()).unwrap() + 0.5 * alpha * d.dot(&d)
                };
                let base = obj(&u);
                for _ in 0..200 {
                    let mut d = gauss(&mut rng, 12);
                    d /= norm(&d);
                    let moved = &u + &(d * 1e-6);
                    assert!(obj(&moved) >= base - 1e-9, "{}", reg.penalty().name());
                }
            }
        }
    }

    #[test]
    fn prox_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut regs = closed_form_regs();
        regs.push(Regularizer::new(1.5, Penalty::Tv { rows: 3, cols: 4, inner: InnerSchedule::Fixed(20) }).unwrap());
        for mut reg in regs {
            for k in 0..1000 {
                let a = gauss(&mut rng, 12);
                // alternate far pairs and close pairs
                let b = if k % 2 == 0 { gauss(&mut rng, 12) } else { &a + &(gauss(&mut rng, 12) * 1e-3) };
                reg.reset();
                let pa = reg.prox(a.view()).unwrap().point;
                reg.reset();
                let pb = reg.prox(b.view()).unwrap().point;
                let lhs = norm(&(&pa - &pb));
                let rhs = norm(&(&a - &b));
                assert!(lhs <= rhs * (1.0 + 1e-12), "{}: {lhs} > {rhs}", reg.penalty().name());
            }
        }
    }

    #[test]
    fn conjugate_examples() {
        let mut zero = Regularizer::zero(1.0).unwrap();
        assert_eq!(zero.conjugate_value(array![3.0, 4.0].view()).unwrap().value, 12.5);

        let mut l1 = Regularizer::elastic_net(1.0).unwrap();
        assert!(l1.conjugate_value(array![0.5].view()).unwrap().value.abs() < 1e-15);
        let at_two = l1.conjugate_value(array![2.0].view()).unwrap().value;
        assert!((at_two - 0.5).abs() < 1e-15);
        // sup_u 2u - |u| - u^2/2 over a fine grid
        let brute = (0..=40_000)
            .map(|k| -2.0 + k as f64 * 1e-4)
            .map(|u: f64| 2.0 * u - u.abs() - 0.5 * u * u)
            .fold(f64::MIN, f64::max);
        assert!((at_two - brute).abs() < 1e-8);
    }

    #[test]
    fn dual_gradient_examples() {
        let mut zero = Regularizer::zero(2.0).unwrap();
        assert_eq!(zero.dual_gradient(array![4.0, -2.0].view()).unwrap(), array![2.0, -1.0]);
        let mut l1 = Regularizer::elastic_net(1.0).unwrap();
        assert_eq!(l1.dual_gradient(array![2.0].view()).unwrap(), array![1.0]);
        assert_eq!(l1.dual_gradient(array![0.5].view()).unwrap(), array![0.0]);
        let h = 1e-5;
        let fd = (l1.conjugate_value(array![2.0 + h].view()).unwrap().value
            - l1.conjugate_value(array![2.0 - h].view()).unwrap().value)
            / (2.0 * h);
        assert!((fd - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_penalty_gradient_is_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut reg = Regularizer::zero(0.37).unwrap();
        for _ in 0..50 {
            let v = gauss(&mut rng, 6);
            let g = reg.dual_gradient(v.view()).unwrap();
            assert_eq!(g, &v / 0.37);
        }
    }

    #[test]
    fn dual_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = 1e-5;
        for mut reg in closed_form_regs() {
            for _ in 0..20 {
                let v = gauss(&mut rng, 12) * 2.0;
                let g = reg.dual_gradient(v.view()).unwrap();
                let mut fd = Array1::zeros(12);
                for i in 0..12 {
                    let mut vp = v.clone();
                    vp[i] += h;
                    let mut vm = v.clone();
                    vm[i] -= h;
                    fd[i] = (reg.conjugate_value(vp.view()).unwrap().value
                        - reg.conjugate_value(vm.view()).unwrap().value)
                        / (2.0 * h);
                }
                let err = norm(&(&fd - &g));
                assert!(err <= 1e-5 * norm(&g).max(1.0), "{}: {err}", reg.penalty().name());
            }
        }
    }

    #[test]
    fn dual_objective_examples() {
        let mut l1 = Regularizer::elastic_net(1.0).unwrap();
        let op = LinearOperator::identity(3);
        let y = array![1.0, -2.0, 0.5];
        assert_eq!(dual_objective(&mut l1, &op, y.view(), Array1::zeros(3).view()).unwrap(), 0.0);

        let mut zero = Regularizer::zero(1.0).unwrap();
        let op1 = LinearOperator::identity(1);
        let d = dual_objective(&mut zero, &op1, array![1.0].view(), array![-1.0].view()).unwrap();
        assert!((d + 0.5).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_gradient_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = ndarray::Array2::from_shape_fn((4, 6), |_| rng.sample::<f64, _>(StandardNormal));
        let op = LinearOperator::Dense(m);
        let y = gauss(&mut rng, 4);
        let mut reg = Regularizer::elastic_net(0.8).unwrap();
        let h = 1e-5;
        for _ in 0..10 {
            let v = gauss(&mut rng, 4);
            let s = -op.adjoint(v.view()).unwrap();
            let w = reg.dual_gradient(s.view()).unwrap();
            let grad = -(op.apply(w.view()).unwrap() - &y);
            for i in 0..4 {
                let mut vp = v.clone();
                vp[i] += h;
                let mut vm = v.clone();
                vm[i] -= h;
                let fd = (dual_objective(&mut reg, &op, y.view(), vp.view()).unwrap()
                    - dual_objective(&mut reg, &op, y.view(), vm.view()).unwrap())
                    / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-5, "{fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn tv_prox_is_flagged_inexact_and_warm_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut reg = Regularizer::new(3.0, Penalty::Tv { rows: 5, cols: 5, inner: InnerSchedule::Fixed(20) }).unwrap();
        let w = gauss(&mut rng, 25);
        let first = reg.prox(w.view()).unwrap();
        assert!(matches!(first.precision, Precision::Inexact { .. }));
        assert_eq!(first.inner_iterations, 20);
        let second = reg.prox(w.view()).unwrap();
        let gap = |p: &ProxResult| match p.precision {
            Precision::Inexact { gap } => gap,
            Precision::Exact => 0.0,
        };
        assert!(gap(&second) <= gap(&first) + 1e-12);
        assert!(!reg.conjugate_value(w.view()).unwrap().precision.is_exact());
    }

    #[test]
    fn growing_schedule() {
        let s = InnerSchedule::Growing { base: 20 };
        assert_eq!(s.steps_at(0), 20);
        assert_eq!(s.steps_at(1), (20.0 * (1.0 + 2f64.ln())).ceil() as usize);
        assert!(s.steps_at(100) > s.steps_at(10));
        assert_eq!(InnerSchedule::default().steps_at(7), 20);
    }
}
