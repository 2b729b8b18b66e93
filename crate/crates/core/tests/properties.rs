use approx::assert_relative_eq;
use ndarray::{array, Array1, Array2, ArrayView1};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

use iterreg::experiments::step_norm;
use iterreg::linops::LinearOperator;
use iterreg::problems::{self, InverseProblem};
use iterreg::regularizers::Regularizer;
use iterreg::solvers::{self, SolverConfig, Variant};
use iterreg::stopping;
use iterreg::tikhonov::{self, PathConfig};

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

fn digest(pb: &InverseProblem) -> String {
    let mut h = Sha256::new();
    let LinearOperator::Dense(x) = &pb.op else { panic!("dense operator expected") };
    for v in x.iter().chain(pb.y_obs.iter()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

proptest! {
    #[test]
    fn l1_prox_matches_soft_threshold(alpha in 0.05f64..5.0, w in prop::collection::vec(-10.0f64..10.0, 1..20)) {
        let mut reg = Regularizer::elastic_net(alpha).unwrap();
        let w = Array1::from(w);
        let p = reg.prox(w.view()).unwrap().point;
        for (a, b) in p.iter().zip(w.iter()) {
            let expected = b.signum() * (b.abs() - 1.0 / alpha).max(0.0);
            prop_assert!((a - expected).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn fenchel_young_holds_with_equality_at_the_gradient(
        alpha in 0.1f64..4.0,
        v in prop::collection::vec(-5.0f64..5.0, 6),
        u in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        let mut reg = Regularizer::elastic_net(alpha).unwrap();
        let (v, u) = (Array1::from(v), Array1::from(u));
        let conj = reg.conjugate_value(v.view()).unwrap().value;
        prop_assert!(reg.value(u.view()).unwrap() + conj >= u.dot(&v) - 1e-9);
        let g = reg.dual_gradient(v.view()).unwrap();
        let gap = reg.value(g.view()).unwrap() + conj - g.dot(&v);
        prop_assert!(gap.abs() <= 1e-9 * (1.0 + conj.abs()), "gap {}", gap);
    }
}

#[test]
fn generated_problems_are_reproducible() {
    let a = problems::gen_sparse_regression(40, 80, 5, 0.1, 7).unwrap();
    let b = problems::gen_sparse_regression(40, 80, 5, 0.1, 7).unwrap();
    let c = problems::gen_sparse_regression(40, 80, 5, 0.1, 8).unwrap();
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));

    let dir = tempfile::tempdir().unwrap();
    problems::save_problem(&a, dir.path()).unwrap();
    let back = problems::load_problem(dir.path()).unwrap();
    assert_eq!(digest(&a), digest(&back));
}

#[test]
fn holdout_stop_lands_near_the_a_priori_time() {
    let reg = Regularizer::elastic_net(1.0).unwrap();
    for seed in 0..3 {
        let pb = problems::random_oracle(30, 50, &reg, 8.0, 0.01, seed).unwrap();
        let truth = pb.ground_truth.clone().unwrap();
        let v = pb.dual_certificate.clone().unwrap();
        let mut r = reg.clone();
        let probe = solvers::run_dgd(&pb.op, pb.y_obs.view(), &mut r, &SolverConfig::new(Variant::Dgd, 0)).unwrap();
        let cert = stopping::make_certificate(Variant::Dgd, step_norm(&probe), norm(v.view()), 1.0, 0.01, None).unwrap();

        let cfg = SolverConfig::new(Variant::Dgd, 4 * cert.t_delta).storing_iterates().without_dual_objective();
        let trace = solvers::run_dgd(&pb.op, pb.y_obs.view(), &mut r, &cfg).unwrap();
        let choice = stopping::holdout_stop(&trace, |rec| {
            let it = rec.iterates.as_ref().unwrap();
            let w = it.averaged.as_ref().unwrap();
            norm((w - &truth).view())
        })
        .unwrap();
        let ratio = choice.t_star.max(1) as f64 / cert.t_delta as f64;
        assert!((0.25..=4.0).contains(&ratio), "seed {seed}: t* {} vs t_delta {}", choice.t_star, cert.t_delta);
    }
}

#[test]
fn one_column_refit_is_the_projection_coefficient() {
    let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 4.0]];
    let y = array![1.0, 2.0, -1.0];
    let op = LinearOperator::Dense(x.clone());
    let w = array![0.0, 0.3];
    let r = tikhonov::refit_least_squares(&op, y.view(), w.view()).unwrap().unwrap();
    let col = x.column(1);
    assert_eq!(r[0], 0.0);
    assert_relative_eq!(r[1], col.dot(&y) / col.dot(&col), max_relative = 1e-9);
}

#[test]
fn refit_does_not_hurt_validation_much() {
    for seed in 0..3 {
        let pb = problems::gen_sparse_regression(100, 400, 10, 0.1, seed).unwrap();
        let LinearOperator::Dense(x) = &pb.op else { unreachable!() };
        let (train, val) = problems::holdout_split(100, 0.1, seed).unwrap();
        let rows = |idx: &[usize]| Array2::from_shape_fn((idx.len(), 400), |(i, j)| x[[idx[i], j]]);
        let x_train = LinearOperator::Dense(rows(&train));
        let y_train: Array1<f64> = train.iter().map(|&i| pb.y_obs[i]).collect();
        let x_val = rows(&val);
        let y_val: Array1<f64> = val.iter().map(|&i| pb.y_obs[i]).collect();
        let score = |w: &Array1<f64>| {
            let r = x_val.dot(w) - &y_val;
            r.dot(&r)
        };
        let mut reg = Regularizer::elastic_net(0.03).unwrap();
        let path = tikhonov::solve_path(&x_train, y_train.view(), &mut reg, &PathConfig::new(0.1)).unwrap();
        let plain = tikhonov::select_and_refit(path.clone(), score, false, &x_train, y_train.view()).unwrap();
        let refit = tikhonov::select_and_refit(path, score, true, &x_train, y_train.view()).unwrap();
        let (a, b) = (score(plain.estimate().unwrap()), score(refit.estimate().unwrap()));
        assert!(b <= 1.05 * a, "seed {seed}: refit {b} vs plain {a}");
    }
}
