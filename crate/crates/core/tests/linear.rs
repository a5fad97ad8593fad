use distill_core::data::{gen_linear_problem, LinearProblem};
use distill_core::distillation::{apply_distilled, DistilledData, DistilledStep, StepTargets};
use distill_core::linear_case::{
    exact_construction, gram_rank, optimality_gap, quadratic_loss, solve_normal,
    theta1_closed_form, verify_lower_bound, LowerBoundOptions,
};
use distill_core::models::{sample_init, InitKind, InitSpec, ModelSpec, ParamVector};
use distill_core::objectives::Objective;
use distill_core::tensor::Tensor;

fn problem(seed: u64) -> LinearProblem {
    gen_linear_problem(64, 8, 0.1, seed).unwrap()
}

/// Hand-written `theta0 - eta / M * d^T (d theta0 - t)`.
fn one_step_oracle(theta0: &[f64], d: &Tensor, t: &Tensor, eta: f64) -> Vec<f64> {
    let (m, dim) = (d.shape()[0], d.shape()[1]);
    let mut grad = vec![0.0; dim];
    for i in 0..m {
        let row = d.row(i);
        let r: f64 = row.iter().zip(theta0).map(|(a, b)| a * b).sum::<f64>() - t.data()[i];
        for j in 0..dim {
            grad[j] += row[j] * r / m as f64;
        }
    }
    theta0.iter().zip(&grad).map(|(a, g)| a - eta * g).collect()
}

#[test]
fn normal_equations_zero_the_gradient() {
    for seed in 0..5 {
        let p = problem(seed);
        let theta = solve_normal(&p).unwrap();
        let residual = p.d.matmul(&theta).unwrap().sub(&p.t).unwrap();
        let grad = p.d.matmul_tn(&residual).unwrap();
        assert!(
            grad.data().iter().all(|g| g.abs() < 1e-9),
            "{:?}",
            grad.data()
        );
        // any perturbation increases the loss
        let base = quadratic_loss(&p, &theta).unwrap();
        let bumped = theta.add(&Tensor::full(theta.shape(), 1e-3)).unwrap();
        assert!(quadratic_loss(&p, &bumped).unwrap() > base);
    }
}

#[test]
fn closed_form_step_matches_oracle_and_model_step() {
    let model = ModelSpec::LinearRegressor { dim: 8 };
    let d = Tensor::matrix(
        5,
        8,
        (0..40)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 4.0)
            .collect(),
    )
    .unwrap();
    let t = Tensor::matrix(5, 1, vec![0.5, -1.0, 2.0, 0.0, 1.5]).unwrap();
    let theta0 = sample_init(&InitSpec::new(InitKind::RandomHe, 1), &model, 0).unwrap();
    let eta = 0.05;
    let closed = theta1_closed_form(&theta0.layer(0), &d, &t, eta).unwrap();
    let oracle = one_step_oracle(theta0.flat().data(), &d, &t, eta);
    let distilled = DistilledData::from_batches(
        vec![DistilledStep {
            inputs: d.clone(),
            targets: StepTargets::Values(t.clone()),
        }],
        1,
        eta,
    )
    .unwrap();
    let stepped: ParamVector =
        apply_distilled(&model, &theta0, &distilled, &Objective::QuadraticMse).unwrap();
    for i in 0..8 {
        assert!((closed.data()[i] - oracle[i]).abs() < 1e-12);
        // the rate passes through softplus(softplus_inverse(eta))
        assert!((stepped.flat().data()[i] - oracle[i]).abs() < 1e-10);
    }
}

#[test]
fn exact_construction_reaches_optimum_from_any_start() {
    for seed in 0..5 {
        let p = problem(seed);
        let c = exact_construction(&p).unwrap();
        assert_eq!(c.dtilde.shape(), &[8, 8]);
        for k in 0..10 {
            let theta0 = sample_init(
                &InitSpec::new(InitKind::RandomHe, k),
                &ModelSpec::LinearRegressor { dim: 8 },
                k,
            )
            .unwrap()
            .layer(0)
            .scale(10.0);
            let theta1 = theta1_closed_form(&theta0, &c.dtilde, &c.ttilde, c.eta).unwrap();
            assert!(optimality_gap(&p, &theta1, &c.theta_star).unwrap() <= 1e-8);
        }
    }
}

#[test]
fn gram_rank_counts_independent_rows() {
    let d = Tensor::matrix(3, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 0.0]).unwrap();
    assert_eq!(gram_rank(&d, 1e-10).unwrap(), 2);
    let wide = Tensor::matrix(2, 4, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
    assert_eq!(gram_rank(&wide, 1e-10).unwrap(), 2);
}

#[test]
fn lower_bound_separates_full_and_deficient_rank() {
    let p = gen_linear_problem(32, 3, 0.1, 11).unwrap();
    let options = LowerBoundOptions {
        iterations: 1500,
        meta_lr: 0.05,
        ..LowerBoundOptions::default()
    };
    let full = verify_lower_bound(&p, 3, 20, &options).unwrap();
    let short = verify_lower_bound(&p, 1, 20, &options).unwrap();
    assert!(full.feasible, "{full:?}");
    assert!(!short.feasible, "{short:?}");
    assert_eq!(short.gram_rank, 1);
    assert!(short.worst_gap > 10.0 * full.worst_gap);
}
