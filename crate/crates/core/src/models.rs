//! Differentiable models, their flat parameter vectors, initialization
//! distributions, and plain (non-meta) training and evaluation.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Graph, Var};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::objectives::{head_loss, Objective, Targets};
use crate::rng;
use crate::tensor::{argmax, Tensor, GATHER_ZERO};

/// A small LeNet-style convolutional classifier over single-channel square
/// images: `same`-padded convolutions, each followed by relu and 2x2 average
/// pooling, then fully connected relu layers and a linear output.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvSpec {
    pub side: usize,
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl ConvSpec {
    /// Two conv layers (8 and 16 channels, 5x5) and a linear head.
    pub fn desk(side: usize, classes: usize) -> Self {
        ConvSpec {
            side,
            channels: vec![8, 16],
            kernel: 5,
            hidden: Vec::new(),
            classes,
        }
    }

    /// LeNet dimensions for 28x28 inputs.
    pub fn lenet(classes: usize) -> Self {
        ConvSpec {
            side: 28,
            channels: vec![6, 16],
            kernel: 5,
            hidden: vec![120, 84],
            classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ModelSpec {
    /// `y = d * theta`, `theta` is `dim x 1`, no bias.
    LinearRegressor {
        dim: usize,
    },
    SoftmaxLinear {
        dim: usize,
        classes: usize,
    },
    /// One relu hidden layer.
    Mlp {
        dim: usize,
        hidden: usize,
        classes: usize,
    },
    ConvNet(ConvSpec),
}

/// Position and shape of one parameter tensor inside a [`ParamVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub bias: bool,
}

impl LayerSlot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All weights of a model, concatenated, with per-layer layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    flat: Tensor,
    layout: Vec<LayerSlot>,
}

impl ParamVector {
    pub fn new(flat: Vec<f64>, layout: Vec<LayerSlot>) -> Result<Self> {
        let expected: usize = layout.iter().map(LayerSlot::len).sum();
        if expected != flat.len() {
            return Err(Error::shape("ParamVector", &[expected], &[flat.len()]));
        }
        Ok(ParamVector {
            flat: Tensor::vector(flat),
            layout,
        })
    }

    pub fn zeros(model: &ModelSpec) -> Self {
        let layout = model.layout();
        let n = layout.iter().map(LayerSlot::len).sum();
        ParamVector {
            flat: Tensor::zeros(&[n]),
            layout,
        }
    }

    pub fn flat(&self) -> &Tensor {
        &self.flat
    }

    pub fn layout(&self) -> &[LayerSlot] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.flat.numel()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.numel() == 0
    }

    pub fn layer(&self, i: usize) -> Tensor {
        let s = self.layout[i];
        Tensor::matrix(
            s.rows,
            s.cols,
            self.flat.data()[s.offset..s.offset + s.len()].to_vec(),
        )
        .expect("layout matches flat vector")
    }

    pub fn layers(&self) -> Vec<Tensor> {
        (0..self.layout.len()).map(|i| self.layer(i)).collect()
    }

    pub fn from_layers(layers: &[Tensor], layout: Vec<LayerSlot>) -> Result<Self> {
        if layers.len() != layout.len() {
            return Err(Error::shape(
                "ParamVector::from_layers",
                &[layout.len()],
                &[layers.len()],
            ));
        }
        let mut flat = Vec::with_capacity(layout.iter().map(LayerSlot::len).sum());
        for (t, s) in layers.iter().zip(&layout) {
            if t.numel() != s.len() {
                return Err(Error::shape(
                    "ParamVector::from_layers",
                    &[s.rows, s.cols],
                    t.shape(),
                ));
            }
            flat.extend_from_slice(t.data());
        }
        ParamVector::new(flat, layout)
    }

    pub fn matches(&self, model: &ModelSpec) -> bool {
        self.layout == model.layout()
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ModelSpec::LinearRegressor { dim } => *dim > 0,
            ModelSpec::SoftmaxLinear { dim, classes } => *dim > 0 && *classes > 1,
            ModelSpec::Mlp {
                dim,
                hidden,
                classes,
            } => *dim > 0 && *hidden > 0 && *classes > 1,
            ModelSpec::ConvNet(c) => {
                let mut side = c.side;
                let mut ok = c.kernel % 2 == 1 && c.classes > 1 && !c.channels.is_empty();
                for &ch in &c.channels {
                    ok &= ch > 0 && side >= 2;
                    side /= 2;
                }
                ok && side > 0 && c.hidden.iter().all(|&h| h > 0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!(
                "invalid model dimensions: {self:?}"
            )))
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelSpec::LinearRegressor { dim }
            | ModelSpec::SoftmaxLinear { dim, .. }
            | ModelSpec::Mlp { dim, .. } => *dim,
            ModelSpec::ConvNet(c) => c.side * c.side,
        }
    }

    /// Class count, or `None` for regression models.
    pub fn num_classes(&self) -> Option<usize> {
        match self {
            ModelSpec::LinearRegressor { .. } => None,
            ModelSpec::SoftmaxLinear { classes, .. } | ModelSpec::Mlp { classes, .. } => {
                Some(*classes)
            }
            ModelSpec::ConvNet(c) => Some(c.classes),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().iter().map(LayerSlot::len).sum()
    }

    pub fn layout(&self) -> Vec<LayerSlot> {
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |rows: usize, cols: usize, fan_in: usize, fan_out: usize, bias: bool| {
            slots.push(LayerSlot {
                offset,
                rows,
                cols,
                fan_in,
                fan_out,
                bias,
            });
            offset += rows * cols;
        };
        let dense = |push: &mut dyn FnMut(usize, usize, usize, usize, bool), i: usize, o: usize| {
            push(i, o, i, o, false);
            push(1, o, i, o, true);
        };
        match self {
            ModelSpec::LinearRegressor { dim } => push(*dim, 1, *dim, 1, false),
            ModelSpec::SoftmaxLinear { dim, classes } => dense(&mut push, *dim, *classes),
            ModelSpec::Mlp {
                dim,
                hidden,
                classes,
            } => {
                dense(&mut push, *dim, *hidden);
                dense(&mut push, *hidden, *classes);
            }
            ModelSpec::ConvNet(c) => {
                let k2 = c.kernel * c.kernel;
                let mut cin = 1;
                for &cout in &c.channels {
                    push(cin * k2, cout, cin * k2, cout * k2, false);
                    push(1, cout, cin * k2, cout * k2, true);
                    cin = cout;
                }
                let mut width = conv_features(c);
                for &h in &c.hidden {
                    dense(&mut push, width, h);
                    width = h;
                }
                dense(&mut push, width, c.classes);
            }
        }
        slots
    }

    /// Parameter tensors as graph leaves, one per layout slot.
    pub fn leaves(&self, g: &mut Graph, params: &ParamVector, requires_grad: bool) -> Vec<Var> {
        params
            .layers()
            .into_iter()
            .map(|t| g.leaf(t, requires_grad))
            .collect()
    }

    /// Views of a flat parameter node as per-layer matrices.
    pub fn split_flat(&self, g: &mut Graph, flat: Var) -> Result<Vec<Var>> {
        let mut out = Vec::new();
        for s in self.layout() {
            let index: Arc<[usize]> = (s.offset..s.offset + s.len()).collect();
            out.push(g.gather(flat, index, &[s.rows, s.cols])?);
        }
        Ok(out)
    }

    /// Model outputs: logits for classifiers, `N x 1` predictions for regression.
    pub fn forward(&self, g: &mut Graph, params: &[Var], x: Var) -> Result<Var> {
        let (_, dim) = g.value(x).dims2("forward")?;
        if dim != self.input_dim() {
            return Err(Error::shape("forward", &[dim], &[self.input_dim()]));
        }
        if params.len() != self.layout().len() {
            return Err(Error::shape(
                "forward",
                &[params.len()],
                &[self.layout().len()],
            ));
        }
        match self {
            ModelSpec::LinearRegressor { .. } => g.matmul(x, params[0]),
            ModelSpec::SoftmaxLinear { .. } => dense(g, x, params[0], params[1]),
            ModelSpec::Mlp { .. } => {
                let h = dense(g, x, params[0], params[1])?;
                let h = g.relu(h)?;
                dense(g, h, params[2], params[3])
            }
            ModelSpec::ConvNet(c) => conv_forward(g, c, params, x),
        }
    }

    /// Mean per-example loss under `objective`.
    pub fn loss(
        &self,
        g: &mut Graph,
        params: &[Var],
        x: Var,
        targets: Targets<'_>,
        objective: &Objective,
    ) -> Result<Var> {
        let out = self.forward(g, params, x)?;
        head_loss(g, objective, out, targets)
    }

    /// Loss value and gradient with respect to every layer, without keeping
    /// the graph.
    pub fn loss_and_grad(
        &self,
        params: &ParamVector,
        inputs: &Tensor,
        targets: TargetData<'_>,
        objective: &Objective,
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new();
        let p = self.leaves(&mut g, params, true);
        let x = g.constant(inputs.clone());
        let targets = targets.attach(&mut g);
        let loss = self.loss(&mut g, &p, x, targets, objective)?;
        let value = g.value(loss).item().unwrap_or(f64::NAN);
        let grads = g.backward(loss, &p, false)?;
        Ok((value, grads))
    }

    pub fn dataset_loss(
        &self,
        params: &ParamVector,
        data: &LabeledDataset,
        objective: &Objective,
    ) -> Result<f64> {
        let mut g = Graph::new();
        let p = self.leaves(&mut g, params, false);
        let x = g.constant(data.inputs().clone());
        let loss = self.loss(&mut g, &p, x, Targets::Classes(data.labels()), objective)?;
        Ok(g.value(loss).item().unwrap_or(f64::NAN))
    }

    /// Argmax class per input row (ties to the lowest index).
    pub fn predict(&self, params: &ParamVector, inputs: &Tensor) -> Result<Vec<usize>> {
        const CHUNK: usize = 2048;
        let (n, _) = inputs.dims2("predict")?;
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let mut g = Graph::new();
            let p = self.leaves(&mut g, params, false);
            let x = g.constant(inputs.rows(start, end)?);
            let logits = self.forward(&mut g, &p, x)?;
            let (rows, _) = g.value(logits).dims2("predict")?;
            out.extend((0..rows).map(|r| argmax(g.value(logits).row(r))));
            start = end;
        }
        Ok(out)
    }

    /// Fraction of rows whose argmax prediction equals the label.
    pub fn evaluate(&self, params: &ParamVector, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let predictions = self.predict(params, data.inputs())?;
        let correct = predictions
            .iter()
            .zip(data.labels())
            .filter(|(p, y)| p == y)
            .count();
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Targets as plain data, before being placed in a graph.
#[derive(Debug, Clone, Copy)]
pub enum TargetData<'a> {
    Classes(&'a [usize]),
    Values(&'a Tensor),
}

impl<'a> TargetData<'a> {
    pub fn attach(self, g: &mut Graph) -> Targets<'a> {
        match self {
            TargetData::Classes(c) => Targets::Classes(c),
            TargetData::Values(t) => Targets::Values(g.constant(t.clone())),
        }
    }
}

fn dense(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let h = g.matmul(x, w)?;
    g.add_row(h, b)
}

fn conv_features(c: &ConvSpec) -> usize {
    let mut side = c.side;
    for _ in &c.channels {
        side /= 2;
    }
    c.channels.last().copied().unwrap_or(1) * side * side
}

/// Gather map turning `n` images of `cin x side x side` (row-major, one image
/// per row) into patches of `cin * kernel^2` for every output pixel.
fn im2col_index(n: usize, cin: usize, side: usize, kernel: usize) -> Arc<[usize]> {
    let pad = (kernel / 2) as isize;
    let img = cin * side * side;
    let mut idx = Vec::with_capacity(n * side * side * cin * kernel * kernel);
    for b in 0..n {
        for oy in 0..side as isize {
            for ox in 0..side as isize {
                for c in 0..cin {
                    for ky in 0..kernel as isize {
                        for kx in 0..kernel as isize {
                            let (y, x) = (oy + ky - pad, ox + kx - pad);
                            idx.push(
                                if y < 0 || x < 0 || y >= side as isize || x >= side as isize {
                                    GATHER_ZERO
                                } else {
                                    b * img + c * side * side + y as usize * side + x as usize
                                },
                            );
                        }
                    }
                }
            }
        }
    }
    idx.into()
}

/// Gather map from conv output (`n*side*side x cout`) to 2x2 pooling windows
/// (`n*cout*half*half x 4`), rows in image-major, channel-major order.
fn pool_index(n: usize, cout: usize, side: usize) -> Arc<[usize]> {
    let half = side / 2;
    let mut idx = Vec::with_capacity(n * cout * half * half * 4);
    for b in 0..n {
        for c in 0..cout {
            for py in 0..half {
                for px in 0..half {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let pixel = b * side * side + (2 * py + dy) * side + 2 * px + dx;
                            idx.push(pixel * cout + c);
                        }
                    }
                }
            }
        }
    }
    idx.into()
}

fn conv_forward(g: &mut Graph, c: &ConvSpec, params: &[Var], x: Var) -> Result<Var> {
    let (n, _) = g.value(x).dims2("conv_forward")?;
    let k2 = c.kernel * c.kernel;
    let mut side = c.side;
    let mut cin = 1;
    let mut h = x;
    let mut p = 0;
    for &cout in &c.channels {
        let cols = g.gather(
            h,
            im2col_index(n, cin, side, c.kernel),
            &[n * side * side, cin * k2],
        )?;
        let conv = dense(g, cols, params[p], params[p + 1])?;
        let conv = g.relu(conv)?;
        let half = side / 2;
        let windows = g.gather(
            conv,
            pool_index(n, cout, side),
            &[n * cout * half * half, 4],
        )?;
        let pooled = g.sum_cols(windows)?;
        let pooled = g.scale(pooled, 0.25)?;
        h = g.reshape(pooled, &[n, cout * half * half])?;
        side = half;
        cin = cout;
        p += 2;
    }
    for _ in &c.hidden {
        h = dense(g, h, params[p], params[p + 1])?;
        h = g.relu(h)?;
        p += 2;
    }
    dense(g, h, params[p], params[p + 1])
}

/// Distribution over initial weights.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// One fixed Xavier draw from the given seed, returned for every index.
    FixedSeed(u64),
    /// Weights `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
    RandomXavier,
    /// Weights `N(0, 2 / fan_in)`, zero biases.
    RandomHe,
    /// Draw `index` returns `pool[index % pool.len()]`.
    PretrainedPool(Vec<ParamVector>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    pub seed: u64,
}

impl InitSpec {
    pub fn new(kind: InitKind, seed: u64) -> Self {
        InitSpec { kind, seed }
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if let InitKind::PretrainedPool(pool) = &self.kind {
            if pool.is_empty() {
                return Err(Error::Config("pretrained pool is empty".into()));
            }
            if pool.iter().any(|p| !p.matches(model)) {
                return Err(Error::Config(
                    "pretrained pool layout does not match the model".into(),
                ));
            }
        }
        Ok(())
    }

    /// True when every draw returns the same weights.
    pub fn is_fixed(&self) -> bool {
        match &self.kind {
            InitKind::FixedSeed(_) => true,
            InitKind::PretrainedPool(pool) => pool.len() == 1,
            _ => false,
        }
    }
}

const INIT_STREAM_BASE: u64 = 1 << 32;

/// Draw number `index` from `spec`; a pure function of `(spec, model, index)`.
pub fn sample_init(spec: &InitSpec, model: &ModelSpec, index: u64) -> Result<ParamVector> {
    spec.validate(model)?;
    let layout = model.layout();
    let (seed, stream, he) = match &spec.kind {
        InitKind::PretrainedPool(pool) => {
            return Ok(pool[(index % pool.len() as u64) as usize].clone())
        }
        InitKind::FixedSeed(s) => (*s, INIT_STREAM_BASE, false),
        InitKind::RandomXavier => (spec.seed, INIT_STREAM_BASE.wrapping_add(index), false),
        InitKind::RandomHe => (spec.seed, INIT_STREAM_BASE.wrapping_add(index), true),
    };
    let mut rng = rng::stream(seed, stream);
    let mut flat = Vec::with_capacity(model.num_params());
    for slot in &layout {
        if slot.bias {
            flat.extend(core::iter::repeat(0.0).take(slot.len()));
        } else if he {
            let std = libm::sqrt(2.0 / slot.fan_in as f64);
            flat.extend((0..slot.len()).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            }));
        } else {
            let a = libm::sqrt(6.0 / (slot.fan_in + slot.fan_out) as f64);
            flat.extend((0..slot.len()).map(|_| rng.random_range(-a..a)));
        }
    }
    ParamVector::new(flat, layout)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Minibatch SGD with a fixed learning rate and seeded shuffling.
pub fn train_plain(
    model: &ModelSpec,
    init: &ParamVector,
    data: &LabeledDataset,
    objective: &Objective,
    cfg: &TrainConfig,
) -> Result<ParamVector> {
    if cfg.lr < 0.0 || cfg.batch_size == 0 {
        return Err(Error::Config(
            "train_plain needs lr >= 0 and batch_size >= 1".into(),
        ));
    }
    if cfg.lr == 0.0 || data.is_empty() {
        return Ok(init.clone());
    }
    let mut rng = rng::stream(cfg.seed, rng::streams::TRAIN_SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut params = init.clone();
    let lr = Tensor::scalar(cfg.lr);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select(chunk)?;
            let (loss, grads) = model.loss_and_grad(
                &params,
                batch.inputs(),
                TargetData::Classes(batch.labels()),
                objective,
            )?;
            if !loss.is_finite() {
                return Err(Error::Numeric { op: "train_plain" });
            }
            params = sgd_step(&params, &grads, &lr)?;
        }
    }
    Ok(params)
}

/// `theta - lr * grad` per layer, with the same arithmetic as the recorded
/// inner step.
pub fn sgd_step(params: &ParamVector, grads: &[Tensor], lr: &Tensor) -> Result<ParamVector> {
    let layers = params.layers();
    let mut next = Vec::with_capacity(layers.len());
    for (p, gr) in layers.iter().zip(grads) {
        let step = gr.mul_scalar(lr)?;
        let updated = p.sub(&step)?;
        if !updated.is_finite() {
            return Err(Error::Numeric { op: "sgd_step" });
        }
        next.push(updated);
    }
    ParamVector::from_layers(&next, params.layout().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_are_contiguous() {
        let specs = [
            ModelSpec::LinearRegressor { dim: 3 },
            ModelSpec::SoftmaxLinear { dim: 4, classes: 3 },
            ModelSpec::Mlp {
                dim: 4,
                hidden: 5,
                classes: 3,
            },
            ModelSpec::ConvNet(ConvSpec::desk(8, 3)),
        ];
        for spec in &specs {
            spec.validate().unwrap();
            let mut offset = 0;
            for s in spec.layout() {
                assert_eq!(s.offset, offset);
                offset += s.len();
            }
            assert_eq!(offset, spec.num_params());
        }
        assert_eq!(
            ModelSpec::Mlp {
                dim: 196,
                hidden: 64,
                classes: 10
            }
            .num_params(),
            196 * 64 + 64 + 64 * 10 + 10
        );
    }

    #[test]
    fn lenet_parameter_count() {
        // same padding keeps 7x7 after the second pool: 16*7*7 features
        let n = ModelSpec::ConvNet(ConvSpec::lenet(10)).num_params();
        assert_eq!(
            n,
            (25 * 6 + 6) + (150 * 16 + 16) + (784 * 120 + 120) + (120 * 84 + 84) + (84 * 10 + 10)
        );
    }

    #[test]
    fn fixed_seed_is_repeatable() {
        let model = ModelSpec::Mlp {
            dim: 4,
            hidden: 4,
            classes: 2,
        };
        let spec = InitSpec::new(InitKind::FixedSeed(7), 0);
        assert_eq!(
            sample_init(&spec, &model, 0).unwrap(),
            sample_init(&spec, &model, 0).unwrap()
        );
        assert_eq!(
            sample_init(&spec, &model, 0).unwrap(),
            sample_init(&spec, &model, 9).unwrap()
        );
    }

    #[test]
    fn xavier_bound_and_zero_bias() {
        let model = ModelSpec::SoftmaxLinear { dim: 4, classes: 4 };
        let spec = InitSpec::new(InitKind::RandomXavier, 3);
        let bound = libm::sqrt(6.0 / 8.0);
        for i in 0..20 {
            let p = sample_init(&spec, &model, i).unwrap();
            assert!(p.layer(0).data().iter().all(|v| v.abs() <= bound));
            assert!(p.layer(1).data().iter().all(|&v| v == 0.0));
        }
        assert_ne!(
            sample_init(&spec, &model, 0).unwrap(),
            sample_init(&spec, &model, 1).unwrap()
        );
    }

    #[test]
    fn pool_indexing_wraps() {
        let model = ModelSpec::LinearRegressor { dim: 1 };
        let pool: Vec<ParamVector> = (0..3)
            .map(|i| ParamVector::new(vec![i as f64], model.layout()).unwrap())
            .collect();
        let spec = InitSpec::new(InitKind::PretrainedPool(pool.clone()), 0);
        assert_eq!(sample_init(&spec, &model, 5).unwrap(), pool[2]);
        assert!(InitSpec::new(InitKind::PretrainedPool(Vec::new()), 0)
            .validate(&model)
            .is_err());
    }

    #[test]
    fn zero_softmax_loss_is_log_classes() {
        let model = ModelSpec::SoftmaxLinear {
            dim: 3,
            classes: 10,
        };
        let params = ParamVector::zeros(&model);
        let data = LabeledDataset::new(
            Tensor::matrix(
                4,
                3,
                vec![0.1, 0.2, 0.3, 0.0, 1.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0],
            )
            .unwrap(),
            vec![0, 3, 9, 4],
            10,
        )
        .unwrap();
        let loss = model
            .dataset_loss(&params, &data, &Objective::CrossEntropy)
            .unwrap();
        assert!((loss - libm::log(10.0)).abs() < 1e-12);
        // ties go to class 0
        assert_eq!(model.evaluate(&params, &data).unwrap(), 0.25);
    }

    #[test]
    fn lr_zero_training_is_identity() {
        let model = ModelSpec::SoftmaxLinear { dim: 2, classes: 2 };
        let init = sample_init(&InitSpec::new(InitKind::RandomHe, 1), &model, 0).unwrap();
        let data = LabeledDataset::new(
            Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            vec![0, 1],
            2,
        )
        .unwrap();
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 3,
            batch_size: 1,
            seed: 0,
        };
        assert_eq!(
            train_plain(&model, &init, &data, &Objective::CrossEntropy, &cfg).unwrap(),
            init
        );
    }

    #[test]
    fn input_dimension_checked() {
        let model = ModelSpec::Mlp {
            dim: 3,
            hidden: 2,
            classes: 2,
        };
        let params = ParamVector::zeros(&model);
        let bad = Tensor::matrix(1, 4, vec![0.0; 4]).unwrap();
        assert!(matches!(
            model.predict(&params, &bad),
            Err(Error::Shape { .. })
        ));
    }
}
