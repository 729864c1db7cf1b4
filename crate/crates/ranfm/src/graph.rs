//! Reverse-mode differentiation over an explicitly recorded graph.
//!
//! Operations execute eagerly and append a node; node inputs always precede
//! the node, so the recorded order is already topological. [`Graph::backward`]
//! walks it once in reverse, accumulating gradients, and finally installs a
//! gradient buffer on every leaf (zeros for leaves the loss never touched).
//!
//! A graph is confined to one logical thread; disjoint graphs may run
//! concurrently.

use crate::error::{Error, Result};
use crate::ops::{self, Activation};
use crate::tensor::{Data, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddRow(NodeId, NodeId),
    Activation(NodeId, Activation),
    SoftmaxRows(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
    },
    SliceRows(NodeId, usize),
    SliceCols(NodeId, usize),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    Reshape(NodeId),
    MeanRows(NodeId),
    MaskRows {
        x: NodeId,
        token: NodeId,
        indices: Vec<usize>,
    },
    Sum(NodeId),
    MaskedMse {
        pred: NodeId,
        target: Tensor,
        indices: Vec<usize>,
    },
    SoftmaxXent {
        logits: NodeId,
        class: usize,
    },
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Activation(a, _)
            | Op::SoftmaxRows(a)
            | Op::SliceRows(a, _)
            | Op::SliceCols(a, _)
            | Op::Reshape(a)
            | Op::MeanRows(a)
            | Op::Sum(a) => vec![*a],
            Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Op::Attention { q, k, v } => vec![*q, *k, *v],
            Op::ConcatRows(v) | Op::ConcatCols(v) => v.clone(),
            Op::MaskRows { x, token, .. } => vec![*x, *token],
            Op::MaskedMse { pred, .. } => vec![*pred],
            Op::SoftmaxXent { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Ordered, acyclic record of tensor operations.
#[derive(Debug, Default)]
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the most recent backward pass for this node, if any.
    pub fn grad(&self, id: NodeId) -> Option<Tensor> {
        self.nodes[id.0].value.grad_tensor()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<NodeId> {
        let id = self.nodes.len();
        // Inputs referring to later nodes would form a cycle.
        for input in op.inputs() {
            if input.0 >= id {
                return Err(Error::Contract {
                    op: "graph",
                    detail: "cycle detected: input does not precede node".into(),
                });
            }
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(id))
    }

    /// Register an input tensor (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value).expect("leaf cannot cycle")
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        self.push(Op::MatMul(a, b), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = ops::add(self.value(a), self.value(b))?;
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = ops::sub(self.value(a), self.value(b))?;
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = ops::mul(self.value(a), self.value(b))?;
        self.push(Op::Mul(a, b), value)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        let value = ops::scale(self.value(a), s)?;
        self.push(Op::Scale(a, s), value)
    }

    pub fn add_row_broadcast(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let value = ops::add_row_broadcast(self.value(a), self.value(bias))?;
        self.push(Op::AddRow(a, bias), value)
    }

    pub fn activation(&mut self, a: NodeId, kind: Activation) -> Result<NodeId> {
        let value = ops::activation(self.value(a), kind)?;
        self.push(Op::Activation(a, kind), value)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let value = ops::softmax_rows(self.value(a))?;
        self.push(Op::SoftmaxRows(a), value)
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> Result<NodeId> {
        let value = ops::layer_norm(self.value(x), self.value(gain), self.value(bias), eps)?;
        self.push(Op::LayerNorm { x, gain, bias, eps }, value)
    }

    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId) -> Result<NodeId> {
        let value = ops::attention(self.value(q), self.value(k), self.value(v))?;
        self.push(Op::Attention { q, k, v }, value)
    }

    pub fn slice_rows(&mut self, a: NodeId, r0: usize, r1: usize) -> Result<NodeId> {
        let value = ops::slice_rows(self.value(a), r0, r1)?;
        self.push(Op::SliceRows(a, r0), value)
    }

    pub fn slice_cols(&mut self, a: NodeId, c0: usize, c1: usize) -> Result<NodeId> {
        let value = ops::slice_cols(self.value(a), c0, c1)?;
        self.push(Op::SliceCols(a, c0), value)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let value = ops::concat_rows(&tensors)?;
        self.push(Op::ConcatRows(parts.to_vec()), value)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let value = ops::concat_cols(&tensors)?;
        self.push(Op::ConcatCols(parts.to_vec()), value)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(a).reshaped(shape)?;
        self.push(Op::Reshape(a), value)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let value = ops::mean_rows(self.value(a))?;
        self.push(Op::MeanRows(a), value)
    }

    /// Replace the listed token rows with the mask token row; gradients flow
    /// to the token through masked rows and to the input through the rest.
    pub fn mask_rows(&mut self, x: NodeId, token: NodeId, indices: &[usize]) -> Result<NodeId> {
        let xv = self.value(x);
        let rows = xv.rows();
        let d = xv.cols();
        let tok = self.value(token);
        if tok.numel() != d {
            return Err(Error::ShapeMismatch {
                op: "mask_rows",
                lhs: xv.shape().to_vec(),
                rhs: tok.shape().to_vec(),
            });
        }
        for &i in indices {
            if i >= rows {
                return Err(Error::IndexOutOfRange {
                    op: "mask_rows",
                    index: i,
                    bound: rows,
                });
            }
        }
        let mut value = xv.clone();
        for &i in indices {
            for j in 0..d {
                value.set(i * d + j, tok.get(j));
            }
        }
        value.clear_grad();
        self.push(
            Op::MaskRows {
                x,
                token,
                indices: indices.to_vec(),
            },
            value,
        )
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let value = ops::sum(self.value(a))?;
        self.push(Op::Sum(a), value)
    }

    /// Mean squared error over the flat `indices` of pred against a constant
    /// target. Errors when the index set is empty.
    pub fn masked_mse(&mut self, pred: NodeId, target: Tensor, indices: &[usize]) -> Result<NodeId> {
        if indices.is_empty() {
            return Err(Error::contract("masked_mse", "empty masked position set"));
        }
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(Error::ShapeMismatch {
                op: "masked_mse",
                lhs: pv.shape().to_vec(),
                rhs: target.shape().to_vec(),
            });
        }
        let n = pv.numel();
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    op: "masked_mse",
                    index: i,
                    bound: n,
                });
            }
        }
        let value = masked_mse_value(pv, &target, indices)?;
        self.push(
            Op::MaskedMse {
                pred,
                target,
                indices: indices.to_vec(),
            },
            value,
        )
    }

    /// Cross-entropy of a 1×K logits row against an integer class.
    pub fn softmax_xent(&mut self, logits: NodeId, class: usize) -> Result<NodeId> {
        let lv = self.value(logits);
        let k = lv.numel();
        if class >= k {
            return Err(Error::IndexOutOfRange {
                op: "softmax_xent",
                index: class,
                bound: k,
            });
        }
        let row = lv.to_f64_vec();
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let loss = -(row[class] - m - lse);
        let value = Tensor::from_f64(&[1], &[loss], lv.dtype())?;
        self.push(Op::SoftmaxXent { logits, class }, value)
    }

    /// Reverse accumulation from a scalar loss node. Populates gradient
    /// buffers on every leaf; leaves unreachable from the loss get zeros.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::contract(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.value(loss).shape()),
            ));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        let dtype = self.value(loss).dtype();
        grads[loss.0] = Some(Tensor::full(&[1], 1.0, dtype));

        for id in (0..=loss.0).rev() {
            let gy = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let contribs = self.input_grads(id, &gy)?;
            for (input, grad) in contribs {
                accumulate(&mut grads[input.0], grad)?;
            }
            grads[id] = Some(gy);
        }

        for (i, node) in self.nodes.iter_mut().enumerate() {
            if matches!(node.op, Op::Leaf) {
                let g = match grads[i].take() {
                    Some(g) => g.data().clone(),
                    None => Data::zeros(node.value.numel(), node.value.dtype()),
                };
                node.value.set_grad(g);
            } else if let Some(g) = grads[i].take() {
                node.value.set_grad(g.data().clone());
            }
        }
        Ok(())
    }

    /// Per-input gradient contributions of node `id` given its output grad.
    fn input_grads(&self, id: usize, gy: &Tensor) -> Result<Vec<(NodeId, Tensor)>> {
        let node = &self.nodes[id];
        let out = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                vec![
                    (*a, ops::matmul_nt(gy, bv)?),
                    (*b, ops::matmul_tn(av, gy)?),
                ]
            }
            Op::Add(a, b) => vec![(*a, gy.clone()), (*b, gy.clone())],
            Op::Sub(a, b) => vec![(*a, gy.clone()), (*b, ops::scale(gy, -1.0)?)],
            Op::Mul(a, b) => vec![
                (*a, ops::mul(gy, self.value(*b))?),
                (*b, ops::mul(gy, self.value(*a))?),
            ],
            Op::Scale(a, s) => vec![(*a, ops::scale(gy, *s)?)],
            Op::AddRow(a, bias) => {
                let gb = ops::col_sums(gy)?;
                let gb = reshape_like(gb, self.value(*bias))?;
                vec![(*a, gy.clone()), (*bias, gb)]
            }
            Op::Activation(a, kind) => {
                let mask = ops::activation_grad(self.value(*a), *kind)?;
                vec![(*a, ops::mul(gy, &mask)?)]
            }
            Op::SoftmaxRows(a) => vec![(*a, ops::softmax_backward(&node.value, gy)?)],
            Op::LayerNorm { x, gain, bias, eps } => {
                let (gx, gg, gb) = ops::layer_norm_backward(self.value(*x), self.value(*gain), *eps, gy)?;
                vec![
                    (*x, gx),
                    (*gain, reshape_like(gg, self.value(*gain))?),
                    (*bias, reshape_like(gb, self.value(*bias))?),
                ]
            }
            Op::Attention { q, k, v } => {
                let (gq, gk, gv) =
                    ops::attention_backward(self.value(*q), self.value(*k), self.value(*v), gy)?;
                vec![(*q, gq), (*k, gk), (*v, gv)]
            }
            Op::SliceRows(a, r0) => {
                let total = self.value(*a).rows();
                vec![(*a, ops::embed_rows(gy, total, *r0)?)]
            }
            Op::SliceCols(a, c0) => {
                let total = self.value(*a).cols();
                vec![(*a, ops::embed_cols(gy, total, *c0)?)]
            }
            Op::ConcatRows(parts) => {
                let mut out = Vec::with_capacity(parts.len());
                let mut r0 = 0;
                for &p in parts {
                    let r = self.value(p).rows();
                    out.push((p, ops::slice_rows(gy, r0, r0 + r)?));
                    r0 += r;
                }
                out
            }
            Op::ConcatCols(parts) => {
                let mut out = Vec::with_capacity(parts.len());
                let mut c0 = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    out.push((p, ops::slice_cols(gy, c0, c0 + c)?));
                    c0 += c;
                }
                out
            }
            Op::Reshape(a) => vec![(*a, gy.reshaped(self.value(*a).shape())?)],
            Op::MeanRows(a) => {
                let r = self.value(*a).rows();
                let per_row = ops::scale(gy, 1.0 / r as f64)?;
                vec![(*a, ops::repeat_rows(&per_row, r)?)]
            }
            Op::MaskRows { x, token, indices } => {
                let gx = ops::zero_rows(gy, indices)?;
                let gtok = ops::sum_rows_subset(gy, indices)?;
                let gtok = reshape_like(gtok, self.value(*token))?;
                vec![(*x, gx), (*token, gtok)]
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                vec![(*a, Tensor::full(av.shape(), gy.get(0), av.dtype()))]
            }
            Op::MaskedMse {
                pred,
                target,
                indices,
            } => {
                let pv = self.value(*pred);
                let mut g = Tensor::zeros(pv.shape(), pv.dtype());
                let s = 2.0 * gy.get(0) / indices.len() as f64;
                for &i in indices {
                    g.set(i, masked_grad_at(pv, target, i, s));
                }
                vec![(*pred, g)]
            }
            Op::SoftmaxXent { logits, class } => {
                let lv = self.value(*logits);
                let sm = ops::softmax_rows(&lv.reshaped(&[1, lv.numel()])?)?;
                let mut g = sm.reshaped(lv.shape())?;
                g.set(*class, g.get(*class) - 1.0);
                let g = ops::scale(&g, gy.get(0))?;
                vec![(*logits, g)]
            }
        };
        Ok(out)
    }
}

/// Compute the masked-MSE scalar in the tensor's own precision.
fn masked_mse_value(pred: &Tensor, target: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let dtype = pred.dtype();
    let loss = match (pred.data(), target.data()) {
        (Data::F32(p), Data::F32(tg)) => {
            let mut acc = 0.0f32;
            for &i in indices {
                let d = p[i] - tg[i];
                acc += d * d;
            }
            (acc / indices.len() as f32) as f64
        }
        (Data::F64(p), Data::F64(tg)) => {
            let mut acc = 0.0f64;
            for &i in indices {
                let d = p[i] - tg[i];
                acc += d * d;
            }
            acc / indices.len() as f64
        }
        _ => return Err(Error::MixedPrecision("masked_mse")),
    };
    Tensor::from_f64(&[1], &[loss], dtype)
}

fn masked_grad_at(pred: &Tensor, target: &Tensor, i: usize, s: f64) -> f64 {
    s * (pred.get(i) - target.get(i))
}

fn reshape_like(t: Tensor, like: &Tensor) -> Result<Tensor> {
    t.reshaped(like.shape())
}

fn accumulate(slot: &mut Option<Tensor>, grad: Tensor) -> Result<()> {
    match slot {
        None => *slot = Some(grad),
        Some(existing) => *existing = ops::add(existing, &grad)?,
    }
    Ok(())
}
