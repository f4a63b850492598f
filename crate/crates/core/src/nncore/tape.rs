//! Reverse-mode automatic differentiation over a linear op tape.
//!
//! Each op appends one node holding its output value; `backward` walks the
//! nodes in reverse, accumulating vector-Jacobian products. Every op validates
//! input shapes and scans its output for NaN/Inf, so numeric failures surface
//! at the op that produced them rather than epochs later.

use super::tensor::{dot, matvec_into, matvec_transpose_acc, outer_acc};
use super::{NnError, Result, Tensor};

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Constant leaf; gradients are not tracked through it.
    Input,
    /// Trainable leaf; `backward` produces a gradient for it.
    Param,
    MatVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    AddN { xs: Vec<NodeId> },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Div { a: NodeId, b: NodeId },
    Affine { x: NodeId, mul: f64 },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    Relu { x: NodeId },
    Sqrt { x: NodeId },
    Concat { a: NodeId, b: NodeId },
    Dot { a: NodeId, b: NodeId },
    LogSoftmax { x: NodeId },
    Pick { x: NodeId, index: usize },
    Row { m: NodeId, row: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradient tape. Ops execute eagerly; the recorded graph is consumed by
/// [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward pass, addressed by the `NodeId`s of the
/// tape that produced them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `id`, if the loss depended on it.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads[id.0].take()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value computed at `id`.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Registers a constant leaf (model inputs, targets).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// Registers a trainable leaf whose gradient `backward` will report.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Param, true)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn finish(&mut self, op_name: &'static str, out: Tensor, op: Op, rg: bool) -> Result<NodeId> {
        if let Some(index) = out.data().iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFinite { op: op_name, index });
        }
        Ok(self.push(out, op, rg))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NnError::ShapeMismatch {
                op,
                expected: format!("{sa:?}"),
                got: format!("{sb:?}"),
            });
        }
        Ok(())
    }

    /// `w · x` for matrix `w` and vector `x`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.shape().len() != 2 || xt.shape().len() != 1 || wt.cols() != xt.len() {
            return Err(NnError::ShapeMismatch {
                op: "matvec",
                expected: format!("[r, c] · [c], c = {}", wt.cols()),
                got: format!("{:?} · {:?}", wt.shape(), xt.shape()),
            });
        }
        let rows = wt.rows();
        let mut out = vec![0.0; rows];
        matvec_into(wt.data(), rows, wt.cols(), xt.data(), &mut out);
        let rg = self.needs_grad(&[w, x]);
        self.finish(
            "matvec",
            Tensor::from_parts(vec![rows], out),
            Op::MatVec { w, x },
            rg,
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.needs_grad(&[a, b]);
        self.finish("add", out, Op::Add { a, b }, rg)
    }

    /// Elementwise sum of any number of same-shaped tensors.
    pub fn add_n(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = *xs.first().ok_or(NnError::Empty { what: "add_n inputs" })?;
        let mut data = self.value(first).data().to_vec();
        let shape = self.value(first).shape().to_vec();
        for &x in &xs[1..] {
            self.same_shape("add_n", first, x)?;
            for (o, v) in data.iter_mut().zip(self.value(x).data()) {
                *o += v;
            }
        }
        let rg = self.needs_grad(xs);
        self.finish(
            "add_n",
            Tensor::from_parts(shape, data),
            Op::AddN { xs: xs.to_vec() },
            rg,
        )
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.needs_grad(&[a, b]);
        self.finish("sub", out, Op::Sub { a, b }, rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.needs_grad(&[a, b]);
        self.finish("mul", out, Op::Mul { a, b }, rg)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("div", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x / y);
        let rg = self.needs_grad(&[a, b]);
        self.finish("div", out, Op::Div { a, b }, rg)
    }

    /// `mul * x + add`, elementwise with scalar coefficients.
    pub fn affine(&mut self, x: NodeId, mul: f64, add: f64) -> Result<NodeId> {
        let out = map(self.value(x), |v| mul * v + add);
        let rg = self.needs_grad(&[x]);
        self.finish("affine", out, Op::Affine { x, mul }, rg)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let out = map(self.value(x), |v| 1.0 / (1.0 + (-v).exp()));
        let rg = self.needs_grad(&[x]);
        self.finish("sigmoid", out, Op::Sigmoid { x }, rg)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let out = map(self.value(x), |v| v.tanh());
        let rg = self.needs_grad(&[x]);
        self.finish("tanh", out, Op::Tanh { x }, rg)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let out = map(self.value(x), |v| v.max(0.0));
        let rg = self.needs_grad(&[x]);
        self.finish("relu", out, Op::Relu { x }, rg)
    }

    pub fn sqrt(&mut self, x: NodeId) -> Result<NodeId> {
        let out = map(self.value(x), |v| v.sqrt());
        let rg = self.needs_grad(&[x]);
        self.finish("sqrt", out, Op::Sqrt { x }, rg)
    }

    /// Concatenation of two 1-D tensors.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 1 || tb.shape().len() != 1 {
            return Err(NnError::ShapeMismatch {
                op: "concat",
                expected: "two 1-D tensors".into(),
                got: format!("{:?}, {:?}", ta.shape(), tb.shape()),
            });
        }
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        data.extend_from_slice(ta.data());
        data.extend_from_slice(tb.data());
        let n = data.len();
        let rg = self.needs_grad(&[a, b]);
        self.finish(
            "concat",
            Tensor::from_parts(vec![n], data),
            Op::Concat { a, b },
            rg,
        )
    }

    /// Inner product of two same-length 1-D tensors, yielding a scalar.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("dot", a, b)?;
        let v = dot(self.value(a).data(), self.value(b).data());
        let rg = self.needs_grad(&[a, b]);
        self.finish("dot", Tensor::scalar(v), Op::Dot { a, b }, rg)
    }

    /// Numerically stable `x - logsumexp(x)` over a 1-D tensor.
    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let xt = self.value(x);
        if xt.shape().len() != 1 || xt.is_empty() {
            return Err(NnError::ShapeMismatch {
                op: "log_softmax",
                expected: "non-empty 1-D tensor".into(),
                got: format!("{:?}", xt.shape()),
            });
        }
        let max = xt.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + xt.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let out = map(xt, |v| v - lse);
        let rg = self.needs_grad(&[x]);
        self.finish("log_softmax", out, Op::LogSoftmax { x }, rg)
    }

    /// Selects one element of a 1-D tensor as a scalar.
    pub fn pick(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let xt = self.value(x);
        if xt.shape().len() != 1 || index >= xt.len() {
            return Err(NnError::ShapeMismatch {
                op: "pick",
                expected: format!("1-D tensor with index < {}", xt.len()),
                got: format!("{:?} at index {index}", xt.shape()),
            });
        }
        let v = xt.data()[index];
        let rg = self.needs_grad(&[x]);
        self.finish("pick", Tensor::scalar(v), Op::Pick { x, index }, rg)
    }

    /// Selects row `row` of a 2-D tensor (embedding lookup).
    pub fn row(&mut self, m: NodeId, row: usize) -> Result<NodeId> {
        let mt = self.value(m);
        if mt.shape().len() != 2 || row >= mt.rows() {
            return Err(NnError::ShapeMismatch {
                op: "row",
                expected: format!("2-D tensor with row < {}", mt.rows()),
                got: format!("{:?} at row {row}", mt.shape()),
            });
        }
        let cols = mt.cols();
        let data = mt.data()[row * cols..(row + 1) * cols].to_vec();
        let rg = self.needs_grad(&[m]);
        self.finish(
            "row",
            Tensor::from_parts(vec![cols], data),
            Op::Row { m, row },
            rg,
        )
    }

    /// Runs reverse-mode accumulation from the scalar `loss` and consumes the
    /// tape. Errors if the loss is not scalar or reaches no parameter.
    pub fn backward(self, loss: NodeId) -> Result<Gradients> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.len() != 1 {
            return Err(NnError::NonScalarLoss {
                shape: loss_node.value.shape().to_vec(),
            });
        }
        if !loss_node.requires_grad {
            return Err(NnError::DetachedGraph);
        }

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            if grads[i].is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            let g = grads[i].take().expect("grad present");
            self.accumulate(i, &g, &mut grads);
            if matches!(self.nodes[i].op, Op::Param) {
                grads[i] = Some(g);
            }
        }

        for g in grads.iter().flatten() {
            if let Some(index) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(NnError::NonFinite {
                    op: "backward",
                    index,
                });
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let mut send = |id: NodeId, f: &mut dyn FnMut(&mut Tensor)| {
            if self.nodes[id.0].requires_grad {
                let slot = &mut grads[id.0];
                let t = slot.get_or_insert_with(|| {
                    Tensor::zeros(self.nodes[id.0].value.shape().to_vec())
                });
                f(t);
            }
        };
        match &node.op {
            Op::Input | Op::Param => {}
            Op::MatVec { w, x } => {
                let (wt, xt) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
                let (rows, cols) = (wt.rows(), wt.cols());
                send(*w, &mut |dw| {
                    outer_acc(g.data(), xt.data(), dw.data_mut());
                });
                send(*x, &mut |dx| {
                    matvec_transpose_acc(wt.data(), rows, cols, g.data(), dx.data_mut());
                });
            }
            Op::Add { a, b } => {
                send(*a, &mut |da| acc(da, g.data(), 1.0));
                send(*b, &mut |db| acc(db, g.data(), 1.0));
            }
            Op::AddN { xs } => {
                for x in xs {
                    send(*x, &mut |dx| acc(dx, g.data(), 1.0));
                }
            }
            Op::Sub { a, b } => {
                send(*a, &mut |da| acc(da, g.data(), 1.0));
                send(*b, &mut |db| acc(db, g.data(), -1.0));
            }
            Op::Mul { a, b } => {
                let (at, bt) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                send(*a, &mut |da| acc_mul(da, g.data(), bt.data()));
                send(*b, &mut |db| acc_mul(db, g.data(), at.data()));
            }
            Op::Div { a, b } => {
                let (at, bt) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                send(*a, &mut |da| {
                    for ((o, gv), bv) in da.data_mut().iter_mut().zip(g.data()).zip(bt.data()) {
                        *o += gv / bv;
                    }
                });
                send(*b, &mut |db| {
                    for (((o, gv), av), bv) in db
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(at.data())
                        .zip(bt.data())
                    {
                        *o -= gv * av / (bv * bv);
                    }
                });
            }
            Op::Affine { x, mul } => {
                let m = *mul;
                send(*x, &mut |dx| acc(dx, g.data(), m));
            }
            Op::Sigmoid { x } => {
                let y = &node.value;
                send(*x, &mut |dx| {
                    for ((o, gv), yv) in dx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gv * yv * (1.0 - yv);
                    }
                });
            }
            Op::Tanh { x } => {
                let y = &node.value;
                send(*x, &mut |dx| {
                    for ((o, gv), yv) in dx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gv * (1.0 - yv * yv);
                    }
                });
            }
            Op::Relu { x } => {
                let y = &node.value;
                send(*x, &mut |dx| {
                    for ((o, gv), yv) in dx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        if *yv > 0.0 {
                            *o += gv;
                        }
                    }
                });
            }
            Op::Sqrt { x } => {
                let y = &node.value;
                send(*x, &mut |dx| {
                    for ((o, gv), yv) in dx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gv / (2.0 * yv);
                    }
                });
            }
            Op::Concat { a, b } => {
                let na = self.nodes[a.0].value.len();
                send(*a, &mut |da| acc(da, &g.data()[..na], 1.0));
                send(*b, &mut |db| acc(db, &g.data()[na..], 1.0));
            }
            Op::Dot { a, b } => {
                let gv = g.data()[0];
                let (at, bt) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                send(*a, &mut |da| acc(da, bt.data(), gv));
                send(*b, &mut |db| acc(db, at.data(), gv));
            }
            Op::LogSoftmax { x } => {
                let y = &node.value;
                let gsum: f64 = g.data().iter().sum();
                send(*x, &mut |dx| {
                    for ((o, gv), yv) in dx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gv - yv.exp() * gsum;
                    }
                });
            }
            Op::Pick { x, index } => {
                let gv = g.data()[0];
                send(*x, &mut |dx| dx.data_mut()[*index] += gv);
            }
            Op::Row { m, row } => {
                let cols = g.len();
                send(*m, &mut |dm| {
                    acc_slice(&mut dm.data_mut()[row * cols..(row + 1) * cols], g.data());
                });
            }
        }
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|v| f(*v)).collect())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_parts(
        a.shape().to_vec(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| f(*x, *y))
            .collect(),
    )
}

fn acc(out: &mut Tensor, src: &[f64], scale: f64) {
    for (o, v) in out.data_mut().iter_mut().zip(src) {
        *o += scale * v;
    }
}

fn acc_mul(out: &mut Tensor, g: &[f64], other: &[f64]) {
    for ((o, gv), ov) in out.data_mut().iter_mut().zip(g).zip(other) {
        *o += gv * ov;
    }
}

fn acc_slice(out: &mut [f64], src: &[f64]) {
    for (o, v) in out.iter_mut().zip(src) {
        *o += v;
    }
}
