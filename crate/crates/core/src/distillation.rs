//! Learning distilled data: synthetic inputs plus per-step, per-epoch learning
//! rates such that a short unrolled run of gradient descent on them, started
//! from weights drawn from an initialization distribution, minimizes the loss
//! on real data.
//!
//! The unrolled inner updates are recorded in an autodiff [`Graph`], so the
//! meta-gradient with respect to the synthetic inputs and the raw rates flows
//! back through every inner gradient (second-order terms included).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Graph, Var};
use crate::data::{LabeledDataset, LinearProblem};
use crate::error::{Error, Result};
use crate::models::{sample_init, sgd_step, InitSpec, ModelSpec, ParamVector, TargetData};
use crate::objectives::{Objective, Targets};
use crate::rng::{self, streams};
use crate::tensor::{softplus_inverse, Tensor};

/// Labels or regression targets of one distilled batch. Class labels are
/// fixed; regression targets are learned with the inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum StepTargets {
    Classes(Vec<usize>),
    Values(Tensor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistilledStep {
    /// `M x D`
    pub inputs: Tensor,
    pub targets: StepTargets,
}

impl DistilledStep {
    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn target_data(&self) -> TargetData<'_> {
        match &self.targets {
            StepTargets::Classes(c) => TargetData::Classes(c),
            StepTargets::Values(t) => TargetData::Values(t),
        }
    }
}

/// `S` distilled batches applied for `E` epochs, with raw rates `rho` of
/// shape `S x E`; the rate used at step `s` of epoch `e` is `softplus(rho[s][e])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistilledData {
    pub steps: Vec<DistilledStep>,
    pub lr_raw: Tensor,
}

impl DistilledData {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn num_epochs(&self) -> usize {
        self.lr_raw.shape().get(1).copied().unwrap_or(0)
    }

    pub fn total_images(&self) -> usize {
        self.steps.iter().map(DistilledStep::len).sum()
    }

    /// Learning rates in `S x E` row-major order; all strictly positive for
    /// raw values above roughly -700.
    pub fn rates(&self) -> Vec<f64> {
        self.lr_raw.softplus().into_data()
    }

    pub fn rate(&self, step: usize, epoch: usize) -> f64 {
        self.rates()[step * self.num_epochs() + epoch]
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        let (s, e) = self.lr_raw.dims2("DistilledData")?;
        if s != self.steps.len() || s == 0 || e == 0 {
            return Err(Error::Config(alloc::format!(
                "distilled data has {} steps but learning rates for {s} x {e}",
                self.steps.len()
            )));
        }
        for step in &self.steps {
            let (m, d) = step.inputs.dims2("DistilledData")?;
            if d != model.input_dim() || m == 0 {
                return Err(Error::shape(
                    "DistilledData",
                    step.inputs.shape(),
                    &[m, model.input_dim()],
                ));
            }
            match (&step.targets, model.num_classes()) {
                (StepTargets::Classes(c), Some(classes))
                    if c.len() == m && c.iter().all(|&l| l < classes) => {}
                (StepTargets::Values(t), None) if t.shape() == [m, 1] => {}
                _ => {
                    return Err(Error::Config(
                        "distilled targets do not match the model".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Wrap fixed real batches and a constant learning rate (baselines).
    pub fn from_batches(steps: Vec<DistilledStep>, epochs: usize, lr: f64) -> Result<Self> {
        let s = steps.len();
        let lr_raw = Tensor::matrix(s, epochs, vec![softplus_inverse(lr); s * epochs])?;
        Ok(DistilledData { steps, lr_raw })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DistillConfig {
    /// Meta iterations `T`.
    pub iterations: usize,
    /// Real minibatch size `n`; the whole dataset when larger than it.
    pub batch_size: usize,
    /// Adam step size `alpha`.
    pub meta_lr: f64,
    /// Initial weights sampled per iteration `J`.
    pub inits_per_iter: usize,
    /// Distilled GD steps `S`.
    pub steps: usize,
    /// Passes over the steps `E`.
    pub epochs: usize,
    /// Distilled examples per step `M`; `0` means one per class.
    pub images_per_step: usize,
    pub lr_init: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            iterations: 1000,
            batch_size: 1024,
            meta_lr: 0.001,
            inits_per_iter: 4,
            steps: 10,
            epochs: 3,
            images_per_step: 0,
            lr_init: 0.01,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let positive =
            self.batch_size >= 1 && self.inits_per_iter >= 1 && self.steps >= 1 && self.epochs >= 1;
        if !positive || !(self.meta_lr > 0.0) || !(self.lr_init > 0.0) {
            return Err(Error::Config(alloc::format!(
                "invalid distill config: {self:?}"
            )));
        }
        Ok(())
    }

    fn images_per_step(&self, model: &ModelSpec) -> usize {
        match (self.images_per_step, model.num_classes()) {
            (0, Some(c)) => c,
            (0, None) => model.input_dim(),
            (m, _) => m,
        }
    }
}

/// Real training data the meta-objective is evaluated on.
#[derive(Debug, Clone, Copy)]
pub enum RealData<'a> {
    Classification(&'a LabeledDataset),
    Regression(&'a LinearProblem),
}

impl RealData<'_> {
    pub fn len(&self) -> usize {
        match self {
            RealData::Classification(d) => d.len(),
            RealData::Regression(p) => p.n(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn batch(&self, rows: Option<&[usize]>) -> Result<RealBatch> {
        Ok(match (self, rows) {
            (RealData::Classification(d), None) => {
                RealBatch::Classes(d.inputs().clone(), d.labels().to_vec())
            }
            (RealData::Classification(d), Some(r)) => {
                let s = d.select(r)?;
                RealBatch::Classes(s.inputs().clone(), s.labels().to_vec())
            }
            (RealData::Regression(p), None) => RealBatch::Values(p.d.clone(), p.t.clone()),
            (RealData::Regression(p), Some(r)) => {
                RealBatch::Values(p.d.select_rows(r)?, p.t.select_rows(r)?)
            }
        })
    }
}

#[derive(Debug, Clone)]
enum RealBatch {
    Classes(Tensor, Vec<usize>),
    Values(Tensor, Tensor),
}

impl RealBatch {
    fn inputs(&self) -> &Tensor {
        match self {
            RealBatch::Classes(x, _) | RealBatch::Values(x, _) => x,
        }
    }

    fn targets(&self) -> TargetData<'_> {
        match self {
            RealBatch::Classes(_, c) => TargetData::Classes(c),
            RealBatch::Values(_, t) => TargetData::Values(t),
        }
    }
}

/// Distilled data placed in a graph as differentiable leaves.
#[derive(Debug, Clone)]
pub struct DistilledVars {
    pub inputs: Vec<Var>,
    /// Learnable regression targets, `None` for fixed class labels.
    pub targets: Vec<Option<Var>>,
    pub lr_raw: Var,
    /// `softplus(lr_raw)`
    pub rates: Var,
    epochs: usize,
}

impl DistilledVars {
    pub fn attach(g: &mut Graph, distilled: &DistilledData) -> Result<Self> {
        let inputs = distilled
            .steps
            .iter()
            .map(|s| g.param(s.inputs.clone()))
            .collect();
        let targets = distilled
            .steps
            .iter()
            .map(|s| match &s.targets {
                StepTargets::Classes(_) => None,
                StepTargets::Values(t) => Some(g.param(t.clone())),
            })
            .collect();
        let lr_raw = g.param(distilled.lr_raw.clone());
        let rates = g.softplus(lr_raw)?;
        Ok(DistilledVars {
            inputs,
            targets,
            lr_raw,
            rates,
            epochs: distilled.num_epochs(),
        })
    }

    /// Every leaf in a fixed order: inputs, learnable targets, raw rates.
    fn leaves(&self) -> Vec<Var> {
        let mut out = self.inputs.clone();
        out.extend(self.targets.iter().flatten());
        out.push(self.lr_raw);
        out
    }
}

/// One recorded GD step: `theta - lr * grad_theta loss(batch, theta)`.
pub fn inner_step(
    g: &mut Graph,
    model: &ModelSpec,
    theta: &[Var],
    inputs: Var,
    targets: Targets<'_>,
    lr: Var,
    objective: &Objective,
) -> Result<Vec<Var>> {
    let loss = model.loss(g, theta, inputs, targets, &objective.training_loss())?;
    let grads = g.grad(loss, theta)?;
    theta
        .iter()
        .zip(grads)
        .map(|(&p, gr)| {
            let step = g.mul_scalar(gr, lr)?;
            g.sub(p, step)
        })
        .collect()
}

/// All `S * E` inner steps: epoch-major, step `s` of epoch `e` uses batch `s`
/// and rate `softplus(rho[s][e])`.
pub fn unroll(
    g: &mut Graph,
    model: &ModelSpec,
    theta0: &[Var],
    distilled: &DistilledData,
    vars: &DistilledVars,
    objective: &Objective,
) -> Result<Vec<Var>> {
    let mut theta = theta0.to_vec();
    for e in 0..vars.epochs {
        for (s, step) in distilled.steps.iter().enumerate() {
            let lr = g.element(vars.rates, s * vars.epochs + e)?;
            let targets = match (&step.targets, vars.targets[s]) {
                (StepTargets::Classes(c), _) => Targets::Classes(c),
                (StepTargets::Values(_), Some(t)) => Targets::Values(t),
                (StepTargets::Values(_), None) => {
                    return Err(Error::Contract("missing target leaf".into()))
                }
            };
            theta = inner_step(g, model, &theta, vars.inputs[s], targets, lr, objective)?;
        }
    }
    Ok(theta)
}

/// Real-data loss after unrolling from `theta0`.
pub fn meta_loss(
    g: &mut Graph,
    model: &ModelSpec,
    distilled: &DistilledData,
    vars: &DistilledVars,
    theta0: &[Var],
    real_inputs: Var,
    real_targets: Targets<'_>,
    objective: &Objective,
) -> Result<Var> {
    let theta = unroll(g, model, theta0, distilled, vars, objective)?;
    model.loss(g, &theta, real_inputs, real_targets, objective)
}

/// Meta-loss value and its gradient with respect to every distilled leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaGradient {
    pub loss: f64,
    pub inputs: Vec<Tensor>,
    /// Gradient for learnable regression targets, per step.
    pub targets: Vec<Option<Tensor>>,
    pub lr_raw: Tensor,
}

impl MetaGradient {
    fn add_assign(&mut self, other: &MetaGradient) -> Result<()> {
        self.loss += other.loss;
        for (a, b) in self.inputs.iter_mut().zip(&other.inputs) {
            *a = a.add(b)?;
        }
        for (a, b) in self.targets.iter_mut().zip(&other.targets) {
            if let (Some(a), Some(b)) = (a.as_mut(), b) {
                *a = a.add(b)?;
            }
        }
        self.lr_raw = self.lr_raw.add(&other.lr_raw)?;
        Ok(())
    }
}

/// Meta-loss on `(real_inputs, real_targets)` starting from `theta0`, with its
/// exact gradient through the unrolled steps.
pub fn meta_gradient(
    model: &ModelSpec,
    distilled: &DistilledData,
    theta0: &ParamVector,
    real_inputs: &Tensor,
    real_targets: TargetData<'_>,
    objective: &Objective,
) -> Result<MetaGradient> {
    let mut g = Graph::new();
    let vars = DistilledVars::attach(&mut g, distilled)?;
    let theta = model.leaves(&mut g, theta0, true);
    let x = g.constant(real_inputs.clone());
    let targets = real_targets.attach(&mut g);
    let loss = meta_loss(
        &mut g, model, distilled, &vars, &theta, x, targets, objective,
    )?;
    let value = g.value(loss).item().unwrap_or(f64::NAN);
    let mut grads = g.backward(loss, &vars.leaves(), false)?.into_iter();
    let inputs = (0..vars.inputs.len())
        .map(|_| grads.next().expect("input grad"))
        .collect();
    let targets = vars
        .targets
        .iter()
        .map(|t| t.map(|_| grads.next().expect("target grad")))
        .collect();
    let lr_raw = grads.next().expect("rate grad");
    Ok(MetaGradient {
        loss: value,
        inputs,
        targets,
        lr_raw,
    })
}

/// Apply the distilled schedule with plain arithmetic (nothing recorded).
pub fn apply_distilled(
    model: &ModelSpec,
    theta0: &ParamVector,
    distilled: &DistilledData,
    objective: &Objective,
) -> Result<ParamVector> {
    apply_steps(
        model,
        theta0,
        &distilled.steps,
        &distilled.rates(),
        distilled.num_epochs(),
        objective,
    )
}

/// Run `epochs` passes of GD over `steps`, using `rates[s * epochs + e]`.
pub fn apply_steps(
    model: &ModelSpec,
    theta0: &ParamVector,
    steps: &[DistilledStep],
    rates: &[f64],
    epochs: usize,
    objective: &Objective,
) -> Result<ParamVector> {
    if rates.len() != steps.len() * epochs {
        return Err(Error::shape(
            "apply_steps",
            &[steps.len(), epochs],
            &[rates.len()],
        ));
    }
    let train = objective.training_loss();
    let mut theta = theta0.clone();
    for e in 0..epochs {
        for (s, step) in steps.iter().enumerate() {
            let (_, grads) =
                model.loss_and_grad(&theta, &step.inputs, step.target_data(), &train)?;
            theta = sgd_step(&theta, &grads, &Tensor::scalar(rates[s * epochs + e]))?;
        }
    }
    Ok(theta)
}

/// Distilled data before any optimization: inputs `N(0, 1)`, labels assigned
/// round-robin over classes, every rate equal to `lr_init`.
pub fn initial_distilled(model: &ModelSpec, config: &DistillConfig) -> Result<DistilledData> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, streams::DISTILLED_INIT);
    let m = config.images_per_step(model);
    let d = model.input_dim();
    let mut steps = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let inputs = Tensor::matrix(
            m,
            d,
            (0..m * d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        )?;
        let targets = match model.num_classes() {
            Some(c) => StepTargets::Classes((0..m).map(|i| i % c).collect()),
            None => StepTargets::Values(Tensor::matrix(
                m,
                1,
                (0..m).map(|_| StandardNormal.sample(&mut rng)).collect(),
            )?),
        };
        steps.push(DistilledStep { inputs, targets });
    }
    DistilledData::from_batches(steps, config.epochs, config.lr_init)
}

/// Adam (`beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`) over a list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let bc2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = Self::BETA1 * m[j] + (1.0 - Self::BETA1) * gj;
                v[j] = Self::BETA2 * v[j] + (1.0 - Self::BETA2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *w -= self.lr * mh / (libm::sqrt(vh) + Self::EPS);
            }
        }
    }
}

/// Progress of one meta iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Mean meta-loss over the sampled initializations.
    pub mean_loss: f64,
    /// Initialization draw indices used in this iteration.
    pub init_draws: core::ops::Range<u64>,
}

/// Distillation stopped by a numeric failure; carries the last finite state.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("distillation failed at iteration {iteration}: {error}")]
pub struct DistillFailure {
    pub error: Error,
    pub iteration: usize,
    pub last_good: DistilledData,
}

pub fn distill(
    model: &ModelSpec,
    init: &InitSpec,
    data: RealData<'_>,
    objective: &Objective,
    config: &DistillConfig,
) -> Result<DistilledData, DistillFailure> {
    distill_with(model, init, data, objective, config, |_| {})
}

/// [`distill`] with a per-iteration observer.
///
/// Iteration `t` draws initializations `t*J .. (t+1)*J`, evaluates the
/// meta-loss of each on one shared real minibatch, sums the gradients in draw
/// order and takes one Adam step on the distilled inputs, any learnable
/// targets and the raw rates. Class labels never change.
pub fn distill_with(
    model: &ModelSpec,
    init: &InitSpec,
    data: RealData<'_>,
    objective: &Objective,
    config: &DistillConfig,
    mut observer: impl FnMut(&IterationLog),
) -> Result<DistilledData, DistillFailure> {
    let fail = |error: Error, iteration: usize, last_good: &DistilledData| DistillFailure {
        error,
        iteration,
        last_good: last_good.clone(),
    };
    let mut distilled = match setup(model, init, data, objective, config) {
        Ok(d) => d,
        Err(error) => {
            let empty = DistilledData {
                steps: Vec::new(),
                lr_raw: Tensor::zeros(&[0, 0]),
            };
            return Err(fail(error, 0, &empty));
        }
    };
    let mut rng = rng::stream(config.seed, streams::REAL_BATCH);
    let mut adam = Adam::new(config.meta_lr);
    let j = config.inits_per_iter as u64;
    for t in 0..config.iterations {
        let rows = (config.batch_size < data.len())
            .then(|| index::sample(&mut rng, data.len(), config.batch_size).into_vec());
        let step = (|| -> Result<MetaGradient> {
            let batch = data.batch(rows.as_deref())?;
            let mut total: Option<MetaGradient> = None;
            for draw in t as u64 * j..(t as u64 + 1) * j {
                let theta0 = sample_init(init, model, draw)?;
                let mg = meta_gradient(
                    model,
                    &distilled,
                    &theta0,
                    batch.inputs(),
                    batch.targets(),
                    objective,
                )?;
                match total.as_mut() {
                    None => total = Some(mg),
                    Some(acc) => acc.add_assign(&mg)?,
                }
            }
            Ok(total.expect("at least one init"))
        })();
        let grad = match step {
            Ok(g) if g.loss.is_finite() => g,
            Ok(_) => return Err(fail(Error::Numeric { op: "meta_loss" }, t, &distilled)),
            Err(e) => return Err(fail(e, t, &distilled)),
        };
        let previous = distilled.clone();
        {
            let mut params: Vec<&mut Tensor> = Vec::new();
            let mut grads: Vec<&Tensor> = Vec::new();
            let mut target_params: Vec<&mut Tensor> = Vec::new();
            for (step, gi) in distilled.steps.iter_mut().zip(&grad.inputs) {
                params.push(&mut step.inputs);
                grads.push(gi);
                if let StepTargets::Values(tv) = &mut step.targets {
                    target_params.push(tv);
                }
            }
            params.extend(target_params);
            grads.extend(grad.targets.iter().flatten());
            params.push(&mut distilled.lr_raw);
            grads.push(&grad.lr_raw);
            adam.step(&mut params, &grads);
        }
        let finite = distilled.lr_raw.is_finite()
            && distilled.steps.iter().all(|s| {
                s.inputs.is_finite()
                    && match &s.targets {
                        StepTargets::Values(v) => v.is_finite(),
                        StepTargets::Classes(_) => true,
                    }
            });
        if !finite {
            return Err(fail(Error::Numeric { op: "adam" }, t, &previous));
        }
        observer(&IterationLog {
            iteration: t,
            mean_loss: grad.loss / j as f64,
            init_draws: t as u64 * j..(t as u64 + 1) * j,
        });
    }
    Ok(distilled)
}

fn setup(
    model: &ModelSpec,
    init: &InitSpec,
    data: RealData<'_>,
    objective: &Objective,
    config: &DistillConfig,
) -> Result<DistilledData> {
    config.validate()?;
    model.validate()?;
    init.validate(model)?;
    if data.is_empty() {
        return Err(Error::Config("real dataset is empty".into()));
    }
    match (data, model.num_classes()) {
        (RealData::Classification(d), Some(c))
            if d.num_classes() == c && d.dim() == model.input_dim() =>
        {
            objective.validate(c)?;
        }
        (RealData::Regression(p), None) if p.dim() == model.input_dim() => {}
        _ => return Err(Error::Config("dataset does not match the model".into())),
    }
    if objective.is_classification() != model.num_classes().is_some() {
        return Err(Error::Config("objective does not match the model".into()));
    }
    initial_distilled(model, config)
}

/// Number of initialization draws consumed by a distillation run; held-out
/// evaluation must start at or beyond this index.
pub fn draws_used(config: &DistillConfig) -> u64 {
    (config.iterations as u64) * (config.inits_per_iter as u64)
}
