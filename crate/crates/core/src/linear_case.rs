//! Closed-form analysis of one-step distillation for least-squares linear
//! regression, `l(theta) = 1/(2N) ||d theta - t||^2`.
//!
//! One GD step on `M` synthetic pairs `(d~, t~)` with rate `eta` gives
//! `theta1 = (I - eta/M d~^T d~) theta0 + eta/M d~^T t~`. Reaching the global
//! minimum from every `theta0` forces `eta/M d~^T d~ = I`, which is impossible
//! unless `d~^T d~` has full rank, i.e. `M >= D`.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::LinearProblem;
use crate::distillation::{apply_distilled, distill, draws_used, DistillConfig, RealData};
use crate::error::{Error, Result};
use crate::models::{sample_init, InitKind, InitSpec, ModelSpec, ParamVector};
use crate::objectives::Objective;
use crate::tensor::Tensor;

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &Tensor) -> Option<Vec<f64>> {
    let (n, _) = a.dims2("cholesky").ok()?;
    let a = a.data();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Largest over smallest eigenvalue of an SPD matrix with factor `l`, by power
/// and inverse power iteration.
fn condition_estimate(a: &Tensor, l: &[f64]) -> f64 {
    let n = a.shape()[0];
    let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut v = start.clone();
    normalize(&mut v);
    let mut largest = 0.0;
    for _ in 0..100 {
        let mut w: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a.data()[i * n + j] * v[j]).sum())
            .collect();
        largest = normalize(&mut w);
        v = w;
    }
    let mut v = start;
    normalize(&mut v);
    let mut inv_smallest = 0.0;
    for _ in 0..100 {
        let mut w = cholesky_solve(l, n, &v);
        inv_smallest = normalize(&mut w);
        v = w;
    }
    largest * inv_smallest
}

/// Unique solution of `d^T d theta = d^T t`.
pub fn solve_normal(problem: &LinearProblem) -> Result<Tensor> {
    let gram = problem.d.matmul_tn(&problem.d)?;
    let rhs = problem.d.matmul_tn(&problem.t)?;
    let n = problem.dim();
    let l = cholesky(&gram).ok_or(Error::SingularMatrix {
        condition: f64::INFINITY,
    })?;
    let condition = condition_estimate(&gram, &l);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularMatrix { condition });
    }
    Tensor::matrix(n, 1, cholesky_solve(&l, n, rhs.data()))
}

/// `1/(2N) ||d theta - t||^2`
pub fn quadratic_loss(problem: &LinearProblem, theta: &Tensor) -> Result<f64> {
    let r = problem.d.matmul(theta)?.sub(&problem.t)?;
    Ok(r.data().iter().map(|v| v * v).sum::<f64>() / (2.0 * problem.n() as f64))
}

/// Loss above the global minimum.
pub fn optimality_gap(problem: &LinearProblem, theta: &Tensor, theta_star: &Tensor) -> Result<f64> {
    Ok(quadratic_loss(problem, theta)? - quadratic_loss(problem, theta_star)?)
}

/// One GD step on `(dtilde, ttilde)` with rate `eta`, in matrix form.
pub fn theta1_closed_form(
    theta0: &Tensor,
    dtilde: &Tensor,
    ttilde: &Tensor,
    eta: f64,
) -> Result<Tensor> {
    let (m, dim) = dtilde.dims2("theta1_closed_form")?;
    if theta0.shape() != [dim, 1] || ttilde.shape() != [m, 1] {
        return Err(Error::shape(
            "theta1_closed_form",
            theta0.shape(),
            ttilde.shape(),
        ));
    }
    let c = eta / m as f64;
    let gram = dtilde.matmul_tn(dtilde)?;
    let mut contraction = gram.scale(-c);
    for i in 0..dim {
        contraction.data_mut()[i * dim + i] += 1.0;
    }
    contraction
        .matmul(theta0)?
        .add(&dtilde.matmul_tn(ttilde)?.scale(c))
}

/// An exact one-step distilled set with `M = D`: `d~ = N I`, `t~ = N theta*`,
/// `eta = M / N^2`, so that `eta/M d~^T d~ = I` and `theta1 = theta*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactConstruction {
    pub dtilde: Tensor,
    pub ttilde: Tensor,
    pub eta: f64,
    pub theta_star: Tensor,
}

pub fn exact_construction(problem: &LinearProblem) -> Result<ExactConstruction> {
    let theta_star = solve_normal(problem)?;
    let n = problem.n() as f64;
    let dim = problem.dim();
    let mut dtilde = Tensor::zeros(&[dim, dim]);
    for i in 0..dim {
        dtilde.data_mut()[i * dim + i] = n;
    }
    Ok(ExactConstruction {
        dtilde,
        ttilde: theta_star.scale(n),
        eta: dim as f64 / (n * n),
        theta_star,
    })
}

/// Numerical rank of `d~^T d~` (eigenvalues above `tol * largest`).
pub fn gram_rank(dtilde: &Tensor, tol: f64) -> Result<usize> {
    let gram = dtilde.matmul_tn(dtilde)?;
    let n = gram.shape()[0];
    // Gaussian elimination with partial pivoting on the symmetric Gram matrix.
    let mut a = gram.into_data();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    let mut row = 0;
    for col in 0..n {
        let pivot = (row..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()));
        let Some(p) = pivot else { break };
        if a[p * n + col].abs() <= tol * scale.max(f64::MIN_POSITIVE) {
            continue;
        }
        for k in 0..n {
            a.swap(row * n + k, p * n + k);
        }
        for i in row + 1..n {
            let f = a[i * n + col] / a[row * n + col];
            for k in col..n {
                a[i * n + k] -= f * a[row * n + k];
            }
        }
        rank += 1;
        row += 1;
    }
    Ok(rank)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundOptions {
    pub iterations: usize,
    pub meta_lr: f64,
    pub inits_per_iter: usize,
    pub lr_init: f64,
    pub seed: u64,
    /// Gap at or below which the distilled set counts as reaching the optimum.
    pub tolerance: f64,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        LowerBoundOptions {
            iterations: 4000,
            meta_lr: 0.01,
            inits_per_iter: 8,
            lr_init: 0.01,
            seed: 0,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub m: usize,
    pub d: usize,
    /// Largest optimality gap after one distilled step over the trial inits.
    pub worst_gap: f64,
    pub feasible: bool,
    pub gram_rank: usize,
}

/// Meta-optimize `m` synthetic pairs for a one-step linear regressor over
/// random `theta0 ~ N(0, 2/D)` and report the worst optimality gap over
/// `trials` fresh draws.
pub fn verify_lower_bound(
    problem: &LinearProblem,
    m: usize,
    trials: usize,
    options: &LowerBoundOptions,
) -> Result<LowerBoundReport> {
    if m == 0 {
        return Err(Error::Config("lower-bound check needs M >= 1".into()));
    }
    let theta_star = solve_normal(problem)?;
    let model = ModelSpec::LinearRegressor { dim: problem.dim() };
    let init = InitSpec::new(InitKind::RandomHe, options.seed);
    let config = DistillConfig {
        iterations: options.iterations,
        batch_size: problem.n(),
        meta_lr: options.meta_lr,
        inits_per_iter: options.inits_per_iter,
        steps: 1,
        epochs: 1,
        images_per_step: m,
        lr_init: options.lr_init,
        seed: options.seed,
    };
    let distilled = match distill(
        &model,
        &init,
        RealData::Regression(problem),
        &Objective::QuadraticMse,
        &config,
    ) {
        Ok(d) => d,
        Err(failure) => failure.last_good,
    };
    let first_heldout = draws_used(&config);
    let mut worst_gap = 0.0f64;
    for k in 0..trials as u64 {
        let theta0 = sample_init(&init, &model, first_heldout + k)?;
        let theta1: ParamVector =
            apply_distilled(&model, &theta0, &distilled, &Objective::QuadraticMse)?;
        let gap = optimality_gap(problem, &theta1.layer(0), &theta_star)?;
        worst_gap = worst_gap.max(gap);
    }
    Ok(LowerBoundReport {
        m,
        d: problem.dim(),
        worst_gap,
        feasible: worst_gap <= options.tolerance,
        gram_rank: gram_rank(&distilled.steps[0].inputs, 1e-10)?,
    })
}
