use std::sync::Arc;

use distill_core::autodiff::{hvp, Graph, Var};
use distill_core::distillation::{
    initial_distilled, meta_gradient, DistillConfig, DistilledData, StepTargets,
};
use distill_core::models::{sample_init, ConvSpec, InitKind, InitSpec, ModelSpec, TargetData};
use distill_core::objectives::Objective;
use distill_core::rng::stream;
use distill_core::tensor::Tensor;
use rand::Rng;

const EPS: f64 = 1e-6;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = stream(seed, 99);
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compare reverse-mode gradients of `f` at `inputs` to central differences.
fn check<F>(inputs: &[Tensor], f: F, tol: f64)
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |xs: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.param(x.clone())).collect();
        let out = f(&mut g, &vars);
        g.value(out).item().unwrap()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.param(x.clone())).collect();
    let out = f(&mut g, &vars);
    let grads = g.backward(out, &vars, false).unwrap();
    for (k, x) in inputs.iter().enumerate() {
        for i in 0..x.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += EPS;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= EPS;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * EPS);
            let ad = grads[k].data()[i];
            assert!(
                rel_err(ad, fd) <= tol || (ad - fd).abs() < 1e-9,
                "input {k} element {i}: autodiff {ad} vs finite difference {fd}"
            );
        }
    }
}

/// Reduce to a scalar with a fixed non-uniform weighting so that every
/// output element matters.
fn weighted_sum(g: &mut Graph, v: Var) -> Var {
    let w = random(g.value(v).shape(), 7);
    let w = g.constant(w);
    let p = g.mul(v, w).unwrap();
    g.sum_all(p).unwrap()
}

#[test]
fn matmul_family() {
    let a = random(&[3, 4], 1);
    let b = random(&[4, 2], 2);
    check(
        &[a.clone(), b.clone()],
        |g, v| {
            let y = g.matmul(v[0], v[1]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    let bt = random(&[2, 4], 3);
    check(
        &[a.clone(), bt],
        |g, v| {
            let y = g.matmul_nt(v[0], v[1]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    let c = random(&[3, 5], 4);
    check(
        &[a, c],
        |g, v| {
            let y = g.matmul_tn(v[0], v[1]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
}

#[test]
fn elementwise_ops() {
    let a = random(&[3, 3], 11);
    let b = random(&[3, 3], 12);
    check(
        &[a.clone(), b.clone()],
        |g, v| {
            let s = g.add(v[0], v[1]).unwrap();
            let d = g.sub(s, v[1]).unwrap();
            let m = g.mul(d, v[1]).unwrap();
            let k = g.scale(m, -2.5).unwrap();
            weighted_sum(g, k)
        },
        1e-6,
    );
    check(
        &[a.clone()],
        |g, v| {
            let y = g.sigmoid(v[0]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    check(
        &[a.clone()],
        |g, v| {
            let y = g.softplus(v[0]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    // uniform(-1, 1) entries are never within EPS of the kink
    check(
        &[a.clone()],
        |g, v| {
            let y = g.relu(v[0]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    check(
        &[a, Tensor::scalar(0.7)],
        |g, v| {
            let y = g.mul_scalar(v[0], v[1]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
}

#[test]
fn reductions_and_broadcasts() {
    let a = random(&[4, 3], 21);
    check(
        &[a.clone()],
        |g, v| {
            let y = g.sum_rows(v[0]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    check(
        &[a.clone()],
        |g, v| {
            let y = g.sum_cols(v[0]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    check(
        &[a.clone()],
        |g, v| {
            let y = g.mean_all(v[0]).unwrap();
            let y = g.mul(y, y).unwrap();
            g.sum_all(y).unwrap()
        },
        1e-6,
    );
    let row = random(&[1, 3], 22);
    check(
        &[a.clone(), row],
        |g, v| {
            let y = g.add_row(v[0], v[1]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    let col = random(&[4, 1], 23);
    check(
        &[col],
        |g, v| {
            let y = g.broadcast_cols(v[0], 5).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    check(
        &[a],
        |g, v| {
            let y = g.reshape(v[0], &[2, 6]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
}

#[test]
fn softmax_and_losses() {
    let logits = random(&[4, 5], 31);
    check(
        &[logits.clone()],
        |g, v| {
            let y = g.softmax(v[0]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    let mut targets = vec![0.0; 20];
    for (i, c) in [1usize, 4, 0, 2].iter().enumerate() {
        targets[i * 5 + c] = 1.0;
    }
    let targets = Tensor::matrix(4, 5, targets).unwrap();
    check(
        &[logits],
        |g, v| {
            let t = g.constant(targets.clone());
            g.softmax_cross_entropy(v[0], t).unwrap()
        },
        1e-6,
    );
    let pred = random(&[6, 1], 32);
    let tgt = random(&[6, 1], 33);
    check(&[pred, tgt], |g, v| g.half_mse(v[0], v[1]).unwrap(), 1e-6);
}

#[test]
fn gather_and_scatter() {
    let a = random(&[3, 4], 41);
    let index: Arc<[usize]> = Arc::from(vec![0, 5, 5, usize::MAX, 11, 2]);
    let idx = index.clone();
    check(
        &[a],
        move |g, v| {
            let y = g.gather(v[0], idx.clone(), &[2, 3]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
    let b = random(&[2, 3], 42);
    let sidx: Arc<[usize]> = Arc::from(vec![0, 3, 3, 1, 7, 2]);
    check(
        &[b],
        move |g, v| {
            let y = g.scatter_add(v[0], sidx.clone(), &[2, 4]).unwrap();
            weighted_sum(g, y)
        },
        1e-6,
    );
}

#[test]
fn second_order_through_create_graph() {
    // d/dx of (sum of d/dx f) for f = softplus(x)^2 * sigmoid(x)
    let x = random(&[5], 51);
    check(
        &[x],
        |g, v| {
            let sp = g.softplus(v[0]).unwrap();
            let sq = g.mul(sp, sp).unwrap();
            let sg = g.sigmoid(v[0]).unwrap();
            let f = g.mul(sq, sg).unwrap();
            let f = g.sum_all(f).unwrap();
            let gx = g.grad(f, &[v[0]]).unwrap()[0];
            weighted_sum(g, gx)
        },
        1e-5,
    );
}

#[test]
fn hvp_matches_finite_difference_of_gradient() {
    let model = ModelSpec::Mlp {
        dim: 3,
        hidden: 4,
        classes: 3,
    };
    let theta = sample_init(&InitSpec::new(InitKind::RandomXavier, 5), &model, 0).unwrap();
    let x = random(&[6, 3], 52);
    let labels = [0usize, 1, 2, 2, 1, 0];
    let v = random(&[model.num_params()], 53);
    let layout = theta.layout().to_vec();
    let loss_fn = |g: &mut Graph, flat: Var| {
        let params = model.split_flat(g, flat)?;
        let xi = g.constant(x.clone());
        model.loss(
            g,
            &params,
            xi,
            distill_core::objectives::Targets::Classes(&labels),
            &Objective::CrossEntropy,
        )
    };
    let hv = hvp(loss_fn, theta.flat(), &v).unwrap();
    let grad_at = |t: &Tensor| {
        let p = distill_core::models::ParamVector::new(t.data().to_vec(), layout.clone()).unwrap();
        let (_, grads) = model
            .loss_and_grad(
                &p,
                &x,
                TargetData::Classes(&labels),
                &Objective::CrossEntropy,
            )
            .unwrap();
        grads
            .iter()
            .flat_map(|g| g.data().to_vec())
            .collect::<Vec<f64>>()
    };
    let h = 1e-5;
    let plus = grad_at(&theta.flat().add(&v.scale(h)).unwrap());
    let minus = grad_at(&theta.flat().add(&v.scale(-h)).unwrap());
    for i in 0..hv.numel() {
        let fd = (plus[i] - minus[i]) / (2.0 * h);
        assert!(
            rel_err(hv.data()[i], fd) < 1e-5 || (hv.data()[i] - fd).abs() < 1e-8,
            "component {i}: {} vs {fd}",
            hv.data()[i]
        );
    }
}

fn meta_loss_value(
    model: &ModelSpec,
    distilled: &DistilledData,
    theta0: &distill_core::models::ParamVector,
    x: &Tensor,
    targets: TargetData<'_>,
    objective: &Objective,
) -> f64 {
    meta_gradient(model, distilled, theta0, x, targets, objective)
        .unwrap()
        .loss
}

fn check_meta_gradient(
    model: ModelSpec,
    config: DistillConfig,
    x: Tensor,
    targets: TargetData<'_>,
    objective: Objective,
) {
    let mut distilled = initial_distilled(&model, &config).unwrap();
    for s in &mut distilled.steps {
        s.inputs = s.inputs.scale(0.5);
    }
    let theta0 = sample_init(&InitSpec::new(InitKind::RandomXavier, 9), &model, 3).unwrap();
    let mg = meta_gradient(&model, &distilled, &theta0, &x, targets, &objective).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for s in 0..distilled.num_steps() {
        for i in 0..distilled.steps[s].inputs.numel() {
            let mut p = distilled.clone();
            p.steps[s].inputs.data_mut()[i] += h;
            let mut m = distilled.clone();
            m.steps[s].inputs.data_mut()[i] -= h;
            let fd = (meta_loss_value(&model, &p, &theta0, &x, targets, &objective)
                - meta_loss_value(&model, &m, &theta0, &x, targets, &objective))
                / (2.0 * h);
            let ad = mg.inputs[s].data()[i];
            if ad.abs().max(fd.abs()) > 1e-8 {
                worst = worst.max(rel_err(ad, fd));
            }
        }
        if let StepTargets::Values(t) = &distilled.steps[s].targets {
            for i in 0..t.numel() {
                let mut p = distilled.clone();
                let mut m = distilled.clone();
                if let StepTargets::Values(tp) = &mut p.steps[s].targets {
                    tp.data_mut()[i] += h;
                }
                if let StepTargets::Values(tm) = &mut m.steps[s].targets {
                    tm.data_mut()[i] -= h;
                }
                let fd = (meta_loss_value(&model, &p, &theta0, &x, targets, &objective)
                    - meta_loss_value(&model, &m, &theta0, &x, targets, &objective))
                    / (2.0 * h);
                let ad = mg.targets[s].as_ref().unwrap().data()[i];
                if ad.abs().max(fd.abs()) > 1e-8 {
                    worst = worst.max(rel_err(ad, fd));
                }
            }
        }
    }
    for i in 0..distilled.lr_raw.numel() {
        let mut p = distilled.clone();
        p.lr_raw.data_mut()[i] += h;
        let mut m = distilled.clone();
        m.lr_raw.data_mut()[i] -= h;
        let fd = (meta_loss_value(&model, &p, &theta0, &x, targets, &objective)
            - meta_loss_value(&model, &m, &theta0, &x, targets, &objective))
            / (2.0 * h);
        let ad = mg.lr_raw.data()[i];
        if ad.abs().max(fd.abs()) > 1e-8 {
            worst = worst.max(rel_err(ad, fd));
        }
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

fn config(steps: usize, epochs: usize, m: usize) -> DistillConfig {
    DistillConfig {
        steps,
        epochs,
        images_per_step: m,
        lr_init: 0.2,
        seed: 4,
        ..DistillConfig::default()
    }
}

#[test]
fn meta_gradient_softmax_linear() {
    let model = ModelSpec::SoftmaxLinear { dim: 4, classes: 3 };
    let x = random(&[9, 4], 61);
    let labels: Vec<usize> = (0..9).map(|i| i % 3).collect();
    check_meta_gradient(
        model,
        config(2, 2, 0),
        x,
        TargetData::Classes(&labels),
        Objective::CrossEntropy,
    );
}

#[test]
fn meta_gradient_linear_regressor_with_learned_targets() {
    let model = ModelSpec::LinearRegressor { dim: 3 };
    let x = random(&[8, 3], 62);
    let t = random(&[8, 1], 63);
    check_meta_gradient(
        model,
        config(2, 1, 4),
        x,
        TargetData::Values(&t),
        Objective::QuadraticMse,
    );
}

#[test]
fn meta_gradient_poison_objective() {
    let model = ModelSpec::Mlp {
        dim: 4,
        hidden: 5,
        classes: 3,
    };
    let x = random(&[9, 4], 64);
    let labels: Vec<usize> = (0..9).map(|i| i % 3).collect();
    check_meta_gradient(
        model,
        config(1, 2, 0),
        x,
        TargetData::Classes(&labels),
        Objective::Poison {
            attacked: 0,
            target: 2,
        },
    );
}

#[test]
fn meta_gradient_small_convnet() {
    let model = ModelSpec::ConvNet(ConvSpec {
        side: 4,
        channels: vec![2],
        kernel: 3,
        hidden: vec![],
        classes: 2,
    });
    let x = random(&[4, 16], 65);
    let labels = [0usize, 1, 1, 0];
    check_meta_gradient(
        model,
        config(1, 1, 0),
        x,
        TargetData::Classes(&labels),
        Objective::CrossEntropy,
    );
}
