//! Reverse-mode automatic differentiation on a dynamically built graph.
//!
//! Nodes are appended to an arena in creation order, so the arena index is a
//! topological order. Adjoints are themselves built from graph ops, which makes
//! gradients differentiable again: [`Graph::grad`] returns nodes that can be fed
//! into further computation and differentiated, which is what unrolled
//! gradient descent and Hessian-vector products need.
//!
//! Relu has subgradient 0 at the kink. Cross-entropy targets are constants.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulNT(Var, Var),
    /// `a^T * b`
    MatMulTN(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// Tensor times a one-element node.
    MulScalar(Var, Var),
    SumAll(Var),
    SumRows(Var),
    SumCols(Var),
    BroadcastRows(Var),
    BroadcastCols(Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Softmax(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Var,
    },
    Reshape(Var),
    Gather {
        input: Var,
        index: Arc<[usize]>,
    },
    ScatterAdd {
        input: Var,
        index: Arc<[usize]>,
    },
}

impl Op {
    fn parents(&self) -> ([Option<Var>; 2], usize) {
        use Op::*;
        match *self {
            Leaf => ([None, None], 0),
            MatMul(a, b)
            | MatMulNT(a, b)
            | MatMulTN(a, b)
            | Add(a, b)
            | Sub(a, b)
            | Mul(a, b)
            | MulScalar(a, b) => ([Some(a), Some(b)], 2),
            SoftmaxCrossEntropy { logits, targets } => ([Some(logits), Some(targets)], 2),
            Scale(a, _)
            | SumAll(a)
            | SumRows(a)
            | SumCols(a)
            | BroadcastRows(a)
            | BroadcastCols(a)
            | Relu(a)
            | Sigmoid(a)
            | Softplus(a)
            | Softmax(a)
            | Reshape(a) => ([Some(a), None], 1),
            Gather { input, .. } | ScatterAdd { input, .. } => ([Some(input), None], 1),
        }
    }

    fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Leaf => "leaf",
            MatMul(..) => "matmul",
            MatMulNT(..) => "matmul_nt",
            MatMulTN(..) => "matmul_tn",
            Add(..) => "add",
            Sub(..) => "sub",
            Mul(..) => "mul",
            Scale(..) => "scale",
            MulScalar(..) => "mul_scalar",
            SumAll(..) => "sum_all",
            SumRows(..) => "sum_rows",
            SumCols(..) => "sum_cols",
            BroadcastRows(..) => "broadcast_rows",
            BroadcastCols(..) => "broadcast_cols",
            Relu(..) => "relu",
            Sigmoid(..) => "sigmoid",
            Softplus(..) => "softplus",
            Softmax(..) => "softmax",
            SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            Reshape(..) => "reshape",
            Gather { .. } => "gather",
            ScatterAdd { .. } => "scatter_add",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A computation graph. Single-threaded; independent graphs may live on
/// different threads.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> &Op {
        &self.nodes[v.0].op
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf that gradients can be taken with respect to.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric { op: op.name() });
        }
        let (parents, n) = op.parents();
        let requires_grad = parents[..n]
            .iter()
            .flatten()
            .any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), v)
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        self.push(Op::MatMulNT(a, b), v)
    }

    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_tn(self.value(b))?;
        self.push(Op::MatMulTN(a, b), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).mul(self.value(b))?;
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let v = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), v)
    }

    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let v = self.value(a).mul_scalar(self.value(s))?;
        self.push(Op::MulScalar(a, s), v)
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).sum_all();
        self.push(Op::SumAll(a), v)
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).numel().max(1) as f64;
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n)
    }

    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).sum_rows()?;
        self.push(Op::SumRows(a), v)
    }

    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).sum_cols()?;
        self.push(Op::SumCols(a), v)
    }

    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Result<Var> {
        let v = self.value(a).broadcast_rows(rows)?;
        self.push(Op::BroadcastRows(a), v)
    }

    pub fn broadcast_cols(&mut self, a: Var, cols: usize) -> Result<Var> {
        let v = self.value(a).broadcast_cols(cols)?;
        self.push(Op::BroadcastCols(a), v)
    }

    /// `a + bias`, with a `1 x c` bias repeated over the rows of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (rows, _) = self.value(a).dims2("add_row")?;
        let b = self.broadcast_rows(bias, rows)?;
        self.add(a, b)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).relu();
        self.push(Op::Relu(a), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).sigmoid();
        self.push(Op::Sigmoid(a), v)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).softplus();
        self.push(Op::Softplus(a), v)
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).softmax_rows()?;
        self.push(Op::Softmax(a), v)
    }

    /// Mean cross-entropy of row-wise softmax against (constant) target rows.
    /// Target rows must sum to one.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Var) -> Result<Var> {
        if self.requires_grad(targets) {
            return Err(Error::Contract(
                "cross-entropy targets must be constants".into(),
            ));
        }
        let v = self
            .value(logits)
            .softmax_cross_entropy(self.value(targets))?;
        self.push(Op::SoftmaxCrossEntropy { logits, targets }, v)
    }

    /// `1/(2N) * ||pred - target||^2` where `N` is the row count of `pred`.
    pub fn half_mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let rows = self
            .value(pred)
            .shape()
            .first()
            .copied()
            .unwrap_or(1)
            .max(1);
        let diff = self.sub(pred, target)?;
        let sq = self.mul(diff, diff)?;
        let total = self.sum_all(sq)?;
        self.scale(total, 0.5 / rows as f64)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).reshape(shape)?;
        self.push(Op::Reshape(a), v)
    }

    pub fn gather(&mut self, a: Var, index: Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).gather(&index, shape)?;
        self.push(Op::Gather { input: a, index }, v)
    }

    pub fn scatter_add(&mut self, a: Var, index: Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).scatter_add(&index, shape)?;
        self.push(Op::ScatterAdd { input: a, index }, v)
    }

    /// Element `i` of `a` as a rank-0 node.
    pub fn element(&mut self, a: Var, i: usize) -> Result<Var> {
        if i >= self.value(a).numel() {
            return Err(Error::shape("element", self.value(a).shape(), &[i]));
        }
        self.gather(a, Arc::from(vec![i]), &[])
    }

    /// Gradients of the scalar `output` with respect to `wrt`.
    ///
    /// With `create_graph` the adjoint computation stays in the graph (see
    /// [`Graph::grad`]); otherwise the temporary nodes are discarded. A `wrt`
    /// node that `output` does not depend on gets a zero tensor.
    pub fn backward(
        &mut self,
        output: Var,
        wrt: &[Var],
        create_graph: bool,
    ) -> Result<Vec<Tensor>> {
        let mark = self.nodes.len();
        let adj = self.adjoints(output, wrt);
        let result = adj.map(|adj| {
            wrt.iter()
                .zip(adj)
                .map(|(&w, a)| match a {
                    Some(a) => self.value(a).clone(),
                    None => Tensor::zeros(self.value(w).shape()),
                })
                .collect()
        });
        if !create_graph || result.is_err() {
            self.nodes.truncate(mark);
        }
        result
    }

    /// Differentiable gradients: the returned nodes are part of the graph and
    /// can be differentiated again.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let adj = self.adjoints(output, wrt)?;
        let mut out = Vec::with_capacity(wrt.len());
        for (&w, a) in wrt.iter().zip(adj) {
            out.push(match a {
                Some(a) => a,
                None => {
                    let z = Tensor::zeros(self.value(w).shape());
                    self.constant(z)
                }
            });
        }
        Ok(out)
    }

    fn adjoints(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Option<Var>>> {
        if self.value(output).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, got shape {:?}",
                self.value(output).shape()
            )));
        }
        let end = output.0 + 1;
        // Nodes on a path from some `wrt` node; adjoints are only formed there.
        let mut dep = vec![false; end];
        for w in wrt {
            if w.0 < end && self.nodes[w.0].requires_grad {
                dep[w.0] = true;
            }
        }
        for i in 0..end {
            if dep[i] || !self.nodes[i].requires_grad {
                continue;
            }
            let (parents, n) = self.nodes[i].op.parents();
            dep[i] = parents[..n].iter().flatten().any(|p| dep[p.0]);
        }

        let mut adj: Vec<Option<Var>> = vec![None; end];
        if dep[output.0] {
            let seed = Tensor::ones(self.value(output).shape());
            adj[output.0] = Some(self.constant(seed));
        }
        for i in (0..end).rev() {
            let Some(g) = adj[i] else { continue };
            let op = self.nodes[i].op.clone();
            self.vjp(Var(i), &op, g, &dep, &mut adj)?;
        }
        Ok(wrt
            .iter()
            .map(|w| if w.0 < end { adj[w.0] } else { None })
            .collect())
    }

    fn accumulate(&mut self, adj: &mut [Option<Var>], p: Var, contrib: Var) -> Result<()> {
        adj[p.0] = Some(match adj[p.0] {
            None => contrib,
            Some(prev) => self.add(prev, contrib)?,
        });
        Ok(())
    }

    fn vjp(
        &mut self,
        node: Var,
        op: &Op,
        g: Var,
        dep: &[bool],
        adj: &mut [Option<Var>],
    ) -> Result<()> {
        use Op::*;
        let d = |v: Var| dep[v.0];
        match *op {
            Leaf => {}
            MatMul(a, b) => {
                if d(a) {
                    let c = self.matmul_nt(g, b)?;
                    self.accumulate(adj, a, c)?;
                }
                if d(b) {
                    let c = self.matmul_tn(a, g)?;
                    self.accumulate(adj, b, c)?;
                }
            }
            MatMulNT(a, b) => {
                if d(a) {
                    let c = self.matmul(g, b)?;
                    self.accumulate(adj, a, c)?;
                }
                if d(b) {
                    let c = self.matmul_tn(g, a)?;
                    self.accumulate(adj, b, c)?;
                }
            }
            MatMulTN(a, b) => {
                if d(a) {
                    let c = self.matmul_nt(b, g)?;
                    self.accumulate(adj, a, c)?;
                }
                if d(b) {
                    let c = self.matmul(a, g)?;
                    self.accumulate(adj, b, c)?;
                }
            }
            Add(a, b) => {
                if d(a) {
                    self.accumulate(adj, a, g)?;
                }
                if d(b) {
                    self.accumulate(adj, b, g)?;
                }
            }
            Sub(a, b) => {
                if d(a) {
                    self.accumulate(adj, a, g)?;
                }
                if d(b) {
                    let c = self.scale(g, -1.0)?;
                    self.accumulate(adj, b, c)?;
                }
            }
            Mul(a, b) => {
                if d(a) {
                    let c = self.mul(g, b)?;
                    self.accumulate(adj, a, c)?;
                }
                if d(b) {
                    let c = self.mul(g, a)?;
                    self.accumulate(adj, b, c)?;
                }
            }
            Scale(a, factor) => {
                if d(a) {
                    let c = self.scale(g, factor)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            MulScalar(a, s) => {
                if d(a) {
                    let c = self.mul_scalar(g, s)?;
                    self.accumulate(adj, a, c)?;
                }
                if d(s) {
                    let prod = self.mul(g, a)?;
                    let total = self.sum_all(prod)?;
                    let shape = self.value(s).shape().to_vec();
                    let c = self.reshape(total, &shape)?;
                    self.accumulate(adj, s, c)?;
                }
            }
            SumAll(a) => {
                if d(a) {
                    let ones = Tensor::ones(self.value(a).shape());
                    let ones = self.constant(ones);
                    let c = self.mul_scalar(ones, g)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            SumRows(a) => {
                if d(a) {
                    let (rows, _) = self.value(a).dims2("sum_rows")?;
                    let c = self.broadcast_rows(g, rows)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            SumCols(a) => {
                if d(a) {
                    let (_, cols) = self.value(a).dims2("sum_cols")?;
                    let c = self.broadcast_cols(g, cols)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            BroadcastRows(a) => {
                if d(a) {
                    let c = self.sum_rows(g)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            BroadcastCols(a) => {
                if d(a) {
                    let c = self.sum_cols(g)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            Relu(a) => {
                if d(a) {
                    let mask = self.value(a).relu_mask();
                    let mask = self.constant(mask);
                    let c = self.mul(g, mask)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            Sigmoid(a) => {
                if d(a) {
                    let sq = self.mul(node, node)?;
                    let slope = self.sub(node, sq)?;
                    let c = self.mul(g, slope)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            Softplus(a) => {
                if d(a) {
                    let slope = self.sigmoid(a)?;
                    let c = self.mul(g, slope)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            Softmax(a) => {
                if d(a) {
                    let (_, cols) = self.value(a).dims2("softmax")?;
                    let gs = self.mul(g, node)?;
                    let row = self.sum_cols(gs)?;
                    let row = self.broadcast_cols(row, cols)?;
                    let centered = self.sub(g, row)?;
                    let c = self.mul(node, centered)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            SoftmaxCrossEntropy { logits, targets } => {
                if d(logits) {
                    let (rows, _) = self.value(logits).dims2("softmax_cross_entropy")?;
                    let p = self.softmax(logits)?;
                    let diff = self.sub(p, targets)?;
                    let diff = self.scale(diff, 1.0 / rows as f64)?;
                    let c = self.mul_scalar(diff, g)?;
                    self.accumulate(adj, logits, c)?;
                }
            }
            Reshape(a) => {
                if d(a) {
                    let shape = self.value(a).shape().to_vec();
                    let c = self.reshape(g, &shape)?;
                    self.accumulate(adj, a, c)?;
                }
            }
            Gather { input, ref index } => {
                if d(input) {
                    let shape = self.value(input).shape().to_vec();
                    let c = self.scatter_add(g, index.clone(), &shape)?;
                    self.accumulate(adj, input, c)?;
                }
            }
            ScatterAdd { input, ref index } => {
                if d(input) {
                    let shape = self.value(input).shape().to_vec();
                    let c = self.gather(g, index.clone(), &shape)?;
                    self.accumulate(adj, input, c)?;
                }
            }
        }
        Ok(())
    }
}

/// Hessian-vector product `H v` of `loss_fn` at `theta`, as the gradient of
/// `<grad loss_fn(theta), v>`. The Hessian is never formed.
pub fn hvp<F>(loss_fn: F, theta: &Tensor, v: &Tensor) -> Result<Tensor>
where
    F: FnOnce(&mut Graph, Var) -> Result<Var>,
{
    if v.numel() != theta.numel() {
        return Err(Error::shape("hvp", theta.shape(), v.shape()));
    }
    let mut g = Graph::new();
    let th = g.param(theta.clone());
    let loss = loss_fn(&mut g, th)?;
    let grad = g.grad(loss, &[th])?[0];
    let dir = g.constant(v.reshape(theta.shape())?);
    let prod = g.mul(grad, dir)?;
    let dot = g.sum_all(prod)?;
    Ok(g.backward(dot, &[th], false)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let b = g.constant(Tensor::matrix(3, 1, vec![1.0, 1.0, 1.0]).unwrap());
        let ab = g.matmul(a, b).unwrap();
        assert_eq!(g.value(ab).shape(), &[2, 1]);
        assert_eq!(g.value(ab).data(), &[6.0, 15.0]);

        let x = g.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);

        let z = g.constant(Tensor::scalar(0.0));
        let sp = g.softplus(z).unwrap();
        assert!((g.value(sp).item().unwrap() - 0.6931).abs() < 1e-4);
    }

    #[test]
    fn square_derivative() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        let grads = g.backward(y, &[x], false).unwrap();
        assert_eq!(grads[0].item(), Some(6.0));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![1.0, 2.0]));
        let y = g.scale(x, 2.0).unwrap();
        assert!(matches!(
            g.backward(y, &[x], false),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn unrelated_wrt_is_zero() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(2.0));
        let other = g.param(Tensor::vector(vec![1.0, 1.0]));
        let y = g.mul(x, x).unwrap();
        let grads = g.backward(y, &[other], false).unwrap();
        assert_eq!(grads[0].data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_without_create_graph_leaves_graph_untouched() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(2.0));
        let y = g.mul(x, x).unwrap();
        let before = g.len();
        g.backward(y, &[x], false).unwrap();
        assert_eq!(g.len(), before);
        g.backward(y, &[x], true).unwrap();
        assert!(g.len() > before);
    }

    #[test]
    fn non_finite_is_numeric_error() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(f64::MAX));
        assert!(matches!(g.scale(x, 10.0), Err(Error::Numeric { .. })));
    }

    #[test]
    fn relu_subgradient_at_zero() {
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![0.0, 1.0]));
        let r = g.relu(x).unwrap();
        let s = g.sum_all(r).unwrap();
        assert_eq!(g.backward(s, &[x], false).unwrap()[0].data(), &[0.0, 1.0]);
    }

    #[test]
    fn hvp_identity_and_diagonal() {
        let theta = Tensor::vector(vec![0.3, -1.2, 2.0]);
        let v = Tensor::vector(vec![0.5, 2.0, -1.0]);
        let hv = hvp(
            |g, th| {
                let sq = g.mul(th, th)?;
                let s = g.sum_all(sq)?;
                g.scale(s, 0.5)
            },
            &theta,
            &v,
        )
        .unwrap();
        assert_eq!(hv.data(), v.data());

        let diag = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let hv = hvp(
            |g, th| {
                let dd = g.constant(diag.clone());
                let sq = g.mul(th, th)?;
                let w = g.mul(sq, dd)?;
                let s = g.sum_all(w)?;
                g.scale(s, 0.5)
            },
            &theta,
            &Tensor::vector(vec![1.0, 1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(hv.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn hvp_rejects_length_mismatch() {
        let r = hvp(
            |g, th| g.sum_all(th),
            &Tensor::vector(vec![1.0]),
            &Tensor::vector(vec![1.0, 2.0]),
        );
        assert!(matches!(r, Err(Error::Shape { .. })));
    }
}
