use std::sync::atomic::{AtomicU32, Ordering};

use super::{kernels, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: usize,
}

/// How the operands of a binary elementwise op line up.
#[derive(Clone, Copy, Debug)]
enum Pairing {
    Same,
    /// Right operand repeats over the leading dimension(s) of the left.
    RepeatRight,
    RepeatLeft,
}

#[derive(Clone, Copy, Debug)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug)]
enum UnaryKind {
    Exp,
    Log,
    Tanh,
    Relu,
    Softplus,
    Sigmoid,
    Square,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Input,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Binary(BinaryKind, Pairing, Var, Var),
    Unary(UnaryKind, Var),
    Sum(Var),
    Mean(Var),
    Broadcast(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records primitive operations in creation order, which is a topological
/// order of the expression graph.
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
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

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, true)
    }

    /// An input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.index].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn check(&self, v: Var) -> Result<&Node> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::ForeignVariable);
        }
        Ok(&self.nodes[v.index])
    }

    fn grad_flag(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.index].requires_grad)
    }

    fn finish(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        let rg = self.grad_flag(inputs);
        Ok(self.push(value, op, rg))
    }

    /// `a[m×k] · b[k×n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.check(a)?.value, &self.check(b)?.value);
        let value = av.matmul(bv)?;
        self.finish("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    /// `a[m×k] · bᵀ` with `b` stored as `[n×k]` (the layout of a layer weight).
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.check(a)?.value, &self.check(b)?.value);
        av.expect_rank2("matmul")?;
        bv.expect_rank2("matmul")?;
        if av.shape()[1] != bv.shape()[1] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: av.shape().to_vec(),
                right: vec![bv.shape()[1], bv.shape()[0]],
            });
        }
        let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[0]);
        let mut out = vec![0.0; m * n];
        kernels::gemm_nt(av.data(), bv.data(), &mut out, m, k, n);
        let value = Tensor::matrix(m, n, out)?;
        self.finish("matmul", value, Op::MatMulNt(a, b), &[a, b])
    }

    fn binary(&mut self, kind: BinaryKind, name: &'static str, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.check(a)?.value, &self.check(b)?.value);
        let pairing = pairing(av.shape(), bv.shape()).ok_or_else(|| Error::ShapeMismatch {
            op: name,
            left: av.shape().to_vec(),
            right: bv.shape().to_vec(),
        })?;
        let f = |x: f64, y: f64| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
            BinaryKind::Div => x / y,
        };
        let (ad, bd) = (av.data(), bv.data());
        let (shape, data): (Vec<usize>, Vec<f64>) = match pairing {
            Pairing::Same => (
                av.shape().to_vec(),
                ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect(),
            ),
            Pairing::RepeatRight => {
                let n = bd.len();
                (
                    av.shape().to_vec(),
                    ad.iter().enumerate().map(|(i, &x)| f(x, bd[i % n])).collect(),
                )
            }
            Pairing::RepeatLeft => {
                let n = ad.len();
                (
                    bv.shape().to_vec(),
                    bd.iter().enumerate().map(|(i, &y)| f(ad[i % n], y)).collect(),
                )
            }
        };
        let value = Tensor::new(shape, data)?;
        self.finish(name, value, Op::Binary(kind, pairing, a, b), &[a, b])
    }

    /// Elementwise sum; the smaller operand may repeat over leading dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, "add", a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, "sub", a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, "mul", a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Div, "div", a, b)
    }

    /// Multiplies by a constant scalar.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let k = self.constant(Tensor::scalar(c));
        self.mul(a, k)
    }

    /// Adds a constant scalar.
    pub fn shift(&mut self, a: Var, c: f64) -> Result<Var> {
        let k = self.constant(Tensor::scalar(c));
        self.add(a, k)
    }

    fn unary(&mut self, kind: UnaryKind, name: &'static str, a: Var) -> Result<Var> {
        let av = &self.check(a)?.value;
        let value = match kind {
            UnaryKind::Exp => av.map(f64::exp),
            UnaryKind::Log => av.map(f64::ln),
            UnaryKind::Tanh => av.map(f64::tanh),
            UnaryKind::Relu => av.map(|x| x.max(0.0)),
            UnaryKind::Softplus => av.map(softplus),
            UnaryKind::Sigmoid => av.map(sigmoid),
            UnaryKind::Square => av.map(|x| x * x),
        };
        self.finish(name, value, Op::Unary(kind, a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Exp, "exp", a)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Log, "log", a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Tanh, "tanh", a)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Relu, "relu", a)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Softplus, "softplus", a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Sigmoid, "sigmoid", a)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Square, "square", a)
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.check(a)?.value.sum();
        self.finish("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let av = &self.check(a)?.value;
        let m = av.sum() / av.len() as f64;
        self.finish("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    /// Stacks `batch` copies of `a` along a new leading dimension.
    pub fn broadcast(&mut self, a: Var, batch: usize) -> Result<Var> {
        let av = &self.check(a)?.value;
        if batch == 0 {
            return Err(Error::InvalidArgument("broadcast to an empty batch".into()));
        }
        let mut shape = vec![batch];
        shape.extend_from_slice(av.shape());
        let data = av.data().repeat(batch);
        let value = Tensor::new(shape, data)?;
        self.finish("broadcast", value, Op::Broadcast(a), &[a])
    }

    /// Reverse sweep from a scalar output. Gradients accumulate over every
    /// use of a value.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.check(output)?;
        if !out.value.is_scalar() {
            return Err(Error::NonScalarOutput(out.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.index + 1];
        grads[output.index] = Some(vec![1.0]);

        for i in (0..=output.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.map(|d| Tensor::new(self.nodes[i].value.shape().to_vec(), d).unwrap()))
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.index].value;
        let wants = |v: Var| self.nodes[v.index].requires_grad;
        match node.op {
            Op::Input => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if wants(a) {
                    // dA = dC · Bᵀ, B is [k×n] so treat it as the [n×k]-stored transpose
                    let acc = slot(grads, a, m * k);
                    kernels::gemm_nt(g, bv.data(), acc, m, n, k);
                }
                if wants(b) {
                    let acc = slot(grads, b, k * n);
                    kernels::gemm_tn(av.data(), g, acc, m, k, n);
                }
            }
            Op::MatMulNt(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[0]);
                if wants(a) {
                    let acc = slot(grads, a, m * k);
                    kernels::gemm_nn(g, bv.data(), acc, m, n, k);
                }
                if wants(b) {
                    // dB[n×k] = dCᵀ · A
                    let acc = slot(grads, b, n * k);
                    kernels::gemm_tn(g, av.data(), acc, m, n, k);
                }
            }
            Op::Binary(kind, pairing, a, b) => {
                let (ad, bd) = (val(a).data(), val(b).data());
                let (na, nb) = (ad.len(), bd.len());
                let idx = |i: usize| -> (usize, usize) {
                    match pairing {
                        Pairing::Same => (i, i),
                        Pairing::RepeatRight => (i, i % nb),
                        Pairing::RepeatLeft => (i % na, i),
                    }
                };
                if wants(a) {
                    let acc = slot(grads, a, na);
                    for (i, &gi) in g.iter().enumerate() {
                        let (ia, ib) = idx(i);
                        acc[ia] += match kind {
                            BinaryKind::Add | BinaryKind::Sub => gi,
                            BinaryKind::Mul => gi * bd[ib],
                            BinaryKind::Div => gi / bd[ib],
                        };
                    }
                }
                if wants(b) {
                    let acc = slot(grads, b, nb);
                    for (i, &gi) in g.iter().enumerate() {
                        let (ia, ib) = idx(i);
                        acc[ib] += match kind {
                            BinaryKind::Add => gi,
                            BinaryKind::Sub => -gi,
                            BinaryKind::Mul => gi * ad[ia],
                            BinaryKind::Div => -gi * ad[ia] / (bd[ib] * bd[ib]),
                        };
                    }
                }
            }
            Op::Unary(kind, a) => {
                if !wants(a) {
                    return;
                }
                let x = val(a).data();
                let y = node.value.data();
                let acc = slot(grads, a, x.len());
                for i in 0..x.len() {
                    let d = match kind {
                        UnaryKind::Exp => y[i],
                        UnaryKind::Log => 1.0 / x[i],
                        UnaryKind::Tanh => 1.0 - y[i] * y[i],
                        UnaryKind::Relu => {
                            if x[i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        UnaryKind::Softplus => sigmoid(x[i]),
                        UnaryKind::Sigmoid => y[i] * (1.0 - y[i]),
                        UnaryKind::Square => 2.0 * x[i],
                    };
                    acc[i] += g[i] * d;
                }
            }
            Op::Sum(a) | Op::Mean(a) => {
                if !wants(a) {
                    return;
                }
                let n = val(a).len();
                let scale = if matches!(node.op, Op::Mean(_)) {
                    g[0] / n as f64
                } else {
                    g[0]
                };
                for v in slot(grads, a, n) {
                    *v += scale;
                }
            }
            Op::Broadcast(a) => {
                if !wants(a) {
                    return;
                }
                let n = val(a).len();
                let acc = slot(grads, a, n);
                for (i, &gi) in g.iter().enumerate() {
                    acc[i % n] += gi;
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.index].get_or_insert_with(|| vec![0.0; len])
}

fn pairing(a: &[usize], b: &[usize]) -> Option<Pairing> {
    if a == b {
        Some(Pairing::Same)
    } else if b.len() < a.len() && a.ends_with(b) {
        Some(Pairing::RepeatRight)
    } else if a.len() < b.len() && b.ends_with(a) {
        Some(Pairing::RepeatLeft)
    } else {
        None
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.index).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, or `None` when `v` does not reach the output.
    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.index).and_then(Option::take)
    }
}
