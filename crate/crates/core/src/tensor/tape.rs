//! Reverse-mode differentiation over a linear record of primitive ops.
//!
//! A [`Tape`] owns the value of every node it records. Leaves are either
//! parameters (differentiated) or constants (inputs, not differentiated);
//! nodes whose inputs are all constants are skipped by [`Tape::backward`].

use std::sync::atomic::{AtomicU64, Ordering};

use super::kernels::{self, Exec};
use super::{ops, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Sum(usize),
    AddBias(usize, usize),
    AddChannelBias(usize, usize),
    Relu(usize),
    Conv2d {
        input: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    MeanPool2(usize),
    Reshape(usize),
    SoftmaxCrossEntropy { logits: usize, labels: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
    /// Softmax probabilities cached by the cross-entropy node.
    aux: Option<Tensor>,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `var`, `None` when it does not influence the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index).and_then(Option::as_ref)
    }

    /// Gradient with respect to `var`, zeros when it does not influence the loss.
    pub fn take(&mut self, var: Var, like: &Tensor) -> Tensor {
        if var.tape == self.tape {
            if let Some(g) = self.grads.get_mut(var.index).and_then(Option::take) {
                return g;
            }
        }
        Tensor::zeros_like(like)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::Tape(format!("{v:?} is not recorded on tape {}", self.id)));
        }
        Ok(v.index)
    }

    fn push(&mut self, op: Op, value: Tensor, inputs: &[usize], aux: Option<Tensor>) -> Var {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
            aux,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Records a differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Records a non-differentiable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
            aux: None,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    pub fn value(&self, v: Var) -> Result<&Tensor> {
        Ok(&self.nodes[self.idx(v)?].value)
    }

    fn val(&self, i: usize) -> &Tensor {
        &self.nodes[i].value
    }

    fn record(&mut self, op: Op, inputs: &[usize]) -> Result<Var> {
        let (value, aux) = eval(&op, &|i| self.val(i))?;
        Ok(self.push(op, value, inputs, aux))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        self.record(Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        self.record(Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        self.record(Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        self.record(Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let a = self.idx(a)?;
        self.record(Op::Scale(a, c), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let a = self.idx(a)?;
        self.record(Op::Sum(a), &[a])
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.idx(x)?, self.idx(bias)?);
        self.record(Op::AddBias(x, b), &[x, b])
    }

    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.idx(x)?, self.idx(bias)?);
        self.record(Op::AddChannelBias(x, b), &[x, b])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        self.record(Op::Relu(x), &[x])
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
        let (input, kernel) = (self.idx(input)?, self.idx(kernel)?);
        self.record(
            Op::Conv2d {
                input,
                kernel,
                stride,
                padding,
            },
            &[input, kernel],
        )
    }

    pub fn mean_pool2(&mut self, x: Var) -> Result<Var> {
        let x = self.idx(x)?;
        self.record(Op::MeanPool2(x), &[x])
    }

    /// Flattens every dimension after the first.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let i = self.idx(x)?;
        let shape = self.val(i).shape();
        let rows = shape[0];
        let cols = shape[1..].iter().product();
        let value = self.val(i).clone().reshape(vec![rows, cols])?;
        Ok(self.push(Op::Reshape(i), value, &[i], None))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let l = self.idx(logits)?;
        self.record(
            Op::SoftmaxCrossEntropy {
                logits: l,
                labels: labels.to_vec(),
            },
            &[l],
        )
    }

    /// Recomputes every node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.op {
                Op::Leaf => node.value.clone(),
                Op::Reshape(i) => values[*i].clone().reshape(node.value.shape().to_vec())?,
                op => eval(op, &|i| &values[i])?.0,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse-mode gradients of the scalar `loss` with respect to every node
    /// that depends on a parameter leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.idx(loss)?;
        if self.val(root).len() != 1 {
            return Err(Error::Tape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.val(root).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root + 1];
        grads[root] = Some(Tensor::scalar(1.0));

        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            for (target, contribution) in self.reverse(node, &g)? {
                if !self.nodes[target].requires_grad {
                    continue;
                }
                match &mut grads[target] {
                    Some(acc) => acc
                        .data_mut()
                        .iter_mut()
                        .zip(contribution.data())
                        .for_each(|(a, c)| *a += c),
                    slot => *slot = Some(contribution),
                }
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    /// Vector-Jacobian products of one node, for each of its inputs.
    fn reverse(&self, node: &Node, g: &Tensor) -> Result<Vec<(usize, Tensor)>> {
        let need = |i: usize| self.nodes[i].requires_grad;
        let out = match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                let exec = Exec::auto(m * k * n);
                let mut v = Vec::new();
                if need(*a) {
                    let ga = kernels::matmul_nt(g.data(), bv.data(), m, n, k, exec);
                    v.push((*a, Tensor::new(vec![m, k], ga)?));
                }
                if need(*b) {
                    let gb = kernels::matmul_tn(av.data(), g.data(), m, k, n, exec);
                    v.push((*b, Tensor::new(vec![k, n], gb)?));
                }
                v
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, ops::scale(g, -1.0))],
            Op::Mul(a, b) => vec![
                (*a, ops::mul(g, self.val(*b))?),
                (*b, ops::mul(g, self.val(*a))?),
            ],
            Op::Scale(a, c) => vec![(*a, ops::scale(g, *c))],
            Op::Sum(a) => {
                let like = self.val(*a);
                vec![(*a, Tensor::filled(like.shape(), g.item())?)]
            }
            Op::AddBias(x, b) => {
                let n = self.val(*b).len();
                let mut gb = vec![0.0; n];
                for row in g.data().chunks(n) {
                    gb.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                }
                vec![(*x, g.clone()), (*b, Tensor::new(vec![n], gb)?)]
            }
            Op::AddChannelBias(x, b) => {
                let shape = self.val(*x).shape();
                let (c, plane) = (shape[1], shape[2] * shape[3]);
                let mut gb = vec![0.0; c];
                for (i, p) in g.data().chunks(plane).enumerate() {
                    gb[i % c] += p.iter().sum::<f64>();
                }
                vec![(*x, g.clone()), (*b, Tensor::new(vec![c], gb)?)]
            }
            Op::Relu(x) => {
                let xv = self.val(*x);
                let data = g
                    .data()
                    .iter()
                    .zip(xv.data())
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                vec![(*x, Tensor::new(xv.shape().to_vec(), data)?)]
            }
            Op::Conv2d {
                input,
                kernel,
                stride,
                padding,
            } => {
                let (xv, kv) = (self.val(*input), self.val(*kernel));
                let geom = ops::conv_geom(xv, kv, *stride, *padding)?;
                let exec = Exec::auto(geom.work());
                let mut v = Vec::new();
                if need(*input) {
                    let gx = kernels::conv2d_grad_input(g.data(), kv.data(), &geom, exec);
                    v.push((*input, Tensor::new(xv.shape().to_vec(), gx)?));
                }
                if need(*kernel) {
                    let gk = kernels::conv2d_grad_kernel(g.data(), xv.data(), &geom, exec);
                    v.push((*kernel, Tensor::new(kv.shape().to_vec(), gk)?));
                }
                v
            }
            Op::MeanPool2(x) => {
                let xv = self.val(*x);
                let s = xv.shape();
                let (h, w) = (s[2], s[3]);
                let (oh, ow) = (h / 2, w / 2);
                let mut gx = vec![0.0; xv.len()];
                for (p, gp) in g.data().chunks(oh * ow).enumerate() {
                    let base = p * h * w;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let q = 0.25 * gp[oy * ow + ox];
                            let i = base + 2 * oy * w + 2 * ox;
                            gx[i] += q;
                            gx[i + 1] += q;
                            gx[i + w] += q;
                            gx[i + w + 1] += q;
                        }
                    }
                }
                vec![(*x, Tensor::new(s.to_vec(), gx)?)]
            }
            Op::Reshape(x) => {
                let shape = self.val(*x).shape().to_vec();
                vec![(*x, g.clone().reshape(shape)?)]
            }
            Op::SoftmaxCrossEntropy { logits, labels } => {
                let probs = node.aux.as_ref().expect("cross-entropy caches probabilities");
                let c = probs.shape()[1];
                let scale = g.item() / labels.len() as f64;
                let mut gl = probs.clone();
                for (row, &label) in gl.data_mut().chunks_mut(c).zip(labels) {
                    row[label] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= scale);
                }
                vec![(*logits, gl)]
            }
        };
        Ok(out)
    }
}

fn eval<'a>(op: &Op, val: &dyn Fn(usize) -> &'a Tensor) -> Result<(Tensor, Option<Tensor>)> {
    let t = match op {
        Op::Leaf | Op::Reshape(_) => unreachable!("leaves and reshapes are not evaluated"),
        Op::MatMul(a, b) => ops::matmul(val(*a), val(*b))?,
        Op::Add(a, b) => ops::add(val(*a), val(*b))?,
        Op::Sub(a, b) => ops::sub(val(*a), val(*b))?,
        Op::Mul(a, b) => ops::mul(val(*a), val(*b))?,
        Op::Scale(a, c) => ops::scale(val(*a), *c),
        Op::Sum(a) => ops::sum(val(*a)),
        Op::AddBias(x, b) => ops::add_bias(val(*x), val(*b))?,
        Op::AddChannelBias(x, b) => ops::add_channel_bias(val(*x), val(*b))?,
        Op::Relu(x) => ops::relu(val(*x)),
        Op::Conv2d {
            input,
            kernel,
            stride,
            padding,
        } => ops::conv2d(val(*input), val(*kernel), *stride, *padding)?,
        Op::MeanPool2(x) => ops::mean_pool2(val(*x))?,
        Op::SoftmaxCrossEntropy { logits, labels } => {
            let (loss, probs) = ops::softmax_cross_entropy(val(*logits), labels)?;
            return Ok((Tensor::scalar(loss), Some(probs)));
        }
    };
    Ok((t, None))
}
