//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so node ids are already a
//! topological order. [`Graph::grad`] walks ids downwards from the output and
//! applies each node's backward rule. The rules are expressed with the same
//! [`Var`] operations as the forward pass: with `create_graph` on, the gradient
//! computation is itself recorded and can be differentiated again (double
//! backward). Convolution stays closed under this: its two adjoints are
//! recorded as ops whose own adjoints are convolutions again.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;

use super::kernels::{self, ConvDims};
use super::tensor::conv_out_dim;
use super::{Real, Tensor};
use crate::{Error, Result};

/// View of a tensor as `[outer, mid, inner]` for middle-axis reductions and broadcasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fold {
    pub outer: usize,
    pub mid: usize,
    pub inner: usize,
}

/// Stride and zero padding of a square-kernel convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub pad: usize,
}

type Id = usize;

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Add(Id, Id),
    Sub(Id, Id),
    Mul(Id, Id),
    Affine(Id, f64),
    Tanh(Id),
    Sigmoid(Id),
    LeakyRelu(Id, f64),
    Abs(Id),
    Log(Id),
    Sqrt(Id),
    Recip(Id),
    Clamp(Id, f64, f64),
    Reshape(Id),
    SumMiddle(Id, Fold),
    BroadcastMiddle(Id, Fold),
    MatMul(Id, Id),
    Transpose(Id),
    Conv(Id, Id, ConvDims),
    ConvInputGrad(Id, Id, ConvDims),
    ConvWeightGrad(Id, Id, ConvDims),
    Upsample(Id),
    SumPool(Id),
    ScaleGrad(Id, f64),
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op,
    requires_grad: bool,
}

/// Owns every node of one forward (and backward) computation.
pub struct Graph<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
    recording: Cell<bool>,
}

/// Handle to a node of a [`Graph`].
pub struct Var<'g, T: Real> {
    graph: &'g Graph<T>,
    id: Id,
}

impl<T: Real> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T: Real> Copy for Var<'_, T> {}

/// Gradients of a scalar with respect to the parameter leaves of a graph.
pub struct Gradients<T> {
    by_id: HashMap<Id, Rc<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.by_id.get(&var.id).map(Rc::as_ref)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            recording: Cell::new(true),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push_leaf(Rc::new(value), false)
    }

    /// Leaf that gradients flow into.
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push_leaf(Rc::new(value), true)
    }

    pub(crate) fn constant_rc(&self, value: Rc<Tensor<T>>) -> Var<'_, T> {
        self.push_leaf(value, false)
    }

    fn push_leaf(&self, value: Rc<Tensor<T>>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, value: Tensor<T>, op: Op, inputs: &[Id]) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = self.recording.get() && inputs.iter().any(|&i| nodes[i].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: Id) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires(&self, id: Id) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn var(&self, id: Id) -> Var<'_, T> {
        Var { graph: self, id }
    }

    /// Evaluate `f` without recording dependencies: results are plain constants.
    pub fn no_grad<R>(&self, f: impl FnOnce() -> R) -> R {
        let prev = self.recording.replace(false);
        let out = f();
        self.recording.set(prev);
        out
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// Entries are `None` where `output` does not depend on that var. With
    /// `create_graph`, the returned vars are differentiable functions of the
    /// graph's leaves.
    pub fn grad<'g>(
        &'g self,
        output: Var<'g, T>,
        wrt: &[Var<'g, T>],
        create_graph: bool,
    ) -> Result<Vec<Option<Var<'g, T>>>> {
        let grads = self.propagate(output, create_graph)?;
        Ok(wrt
            .iter()
            .map(|w| grads.get(w.id).copied().flatten())
            .collect())
    }

    /// First-order gradients of a scalar loss for every reachable parameter leaf.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>> {
        let grads = self.propagate(loss, false)?;
        let nodes = self.nodes.borrow();
        let by_id = grads
            .iter()
            .enumerate()
            .filter_map(|(id, g)| {
                let node = &nodes[id];
                match (g, node.op) {
                    (Some(g), Op::Leaf) if node.requires_grad => {
                        Some((id, Rc::clone(&nodes[g.id].value)))
                    }
                    _ => None,
                }
            })
            .collect();
        Ok(Gradients { by_id })
    }

    fn propagate<'g>(
        &'g self,
        output: Var<'g, T>,
        create_graph: bool,
    ) -> Result<Vec<Option<Var<'g, T>>>> {
        let out_value = self.value(output.id);
        if out_value.numel() != 1 || out_value.rank() > 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar output, got shape {:?}",
                out_value.shape()
            )));
        }
        let mut grads: Vec<Option<Var<'g, T>>> = vec![None; output.id + 1];
        if !self.requires(output.id) {
            return Ok(grads);
        }
        let prev = self.recording.replace(create_graph);
        grads[output.id] = Some(self.constant(Tensor::full(out_value.shape().to_vec(), T::one())));
        for id in (0..=output.id).rev() {
            let Some(g) = grads[id] else { continue };
            let (op, requires) = {
                let n = &self.nodes.borrow()[id];
                (n.op, n.requires_grad)
            };
            if !requires {
                continue;
            }
            self.apply_rule(id, op, g, &mut grads);
        }
        self.recording.set(prev);
        Ok(grads)
    }

    fn apply_rule<'g>(&'g self, id: Id, op: Op, g: Var<'g, T>, grads: &mut [Option<Var<'g, T>>]) {
        let mut acc = |target: Id, contrib: Var<'g, T>| {
            grads[target] = Some(match grads[target] {
                None => contrib,
                Some(prev) => prev.add(contrib).expect("gradient shapes agree"),
            });
        };
        let needs = |i: Id| self.requires(i);
        let v = |i: Id| self.var(i);
        let y = self.var(id);
        const OK: &str = "backward shapes are consistent by construction";
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if needs(a) {
                    acc(a, g);
                }
                if needs(b) {
                    acc(b, g);
                }
            }
            Op::Sub(a, b) => {
                if needs(a) {
                    acc(a, g);
                }
                if needs(b) {
                    acc(b, g.neg());
                }
            }
            Op::Mul(a, b) => {
                if needs(a) {
                    acc(a, g.mul(v(b)).expect(OK));
                }
                if needs(b) {
                    acc(b, g.mul(v(a)).expect(OK));
                }
            }
            Op::Affine(a, s) => acc(a, g.scale(s)),
            Op::Tanh(a) => acc(a, g.mul(y.square().affine(-1.0, 1.0)).expect(OK)),
            Op::Sigmoid(a) => acc(a, g.mul(y.mul(y.affine(-1.0, 1.0)).expect(OK)).expect(OK)),
            Op::LeakyRelu(a, slope) => {
                let s = T::lit(slope);
                let mask = self
                    .value(a)
                    .map(|x| if x > T::zero() { T::one() } else { s });
                acc(a, g.mul(self.constant(mask)).expect(OK));
            }
            Op::Abs(a) => {
                let sign = self.value(a).map(|x| {
                    if x > T::zero() {
                        T::one()
                    } else if x < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    }
                });
                acc(a, g.mul(self.constant(sign)).expect(OK));
            }
            Op::Log(a) => acc(a, g.mul(v(a).recip()).expect(OK)),
            Op::Sqrt(a) => {
                // d√x = 1/(2√x); zero where the output is exactly zero. First-order only.
                let factor = self.value(id).map(|r| {
                    if r > T::zero() {
                        T::lit(0.5) / r
                    } else {
                        T::zero()
                    }
                });
                acc(a, g.mul(self.constant(factor)).expect(OK));
            }
            Op::Recip(a) => acc(a, g.mul(y.square()).expect(OK).neg()),
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (T::lit(lo), T::lit(hi));
                let mask = self.value(a).map(|x| {
                    if x >= lo && x <= hi {
                        T::one()
                    } else {
                        T::zero()
                    }
                });
                acc(a, g.mul(self.constant(mask)).expect(OK));
            }
            Op::Reshape(a) => {
                let shape = self.value(a).shape().to_vec();
                acc(a, g.reshape(shape).expect(OK));
            }
            Op::SumMiddle(a, f) => {
                let shape = self.value(a).shape().to_vec();
                acc(
                    a,
                    g.broadcast_middle(f)
                        .and_then(|v| v.reshape(shape))
                        .expect(OK),
                );
            }
            Op::BroadcastMiddle(a, f) => {
                let shape = self.value(a).shape().to_vec();
                acc(a, g.sum_middle(f).and_then(|v| v.reshape(shape)).expect(OK));
            }
            Op::MatMul(a, b) => {
                if needs(a) {
                    acc(a, g.matmul(v(b).transpose().expect(OK)).expect(OK));
                }
                if needs(b) {
                    acc(b, v(a).transpose().expect(OK).matmul(g).expect(OK));
                }
            }
            Op::Transpose(a) => acc(a, g.transpose().expect(OK)),
            Op::Conv(x, w, d) => {
                if needs(x) {
                    acc(x, self.conv_input_grad(g, v(w), d));
                }
                if needs(w) {
                    acc(w, self.conv_weight_grad(v(x), g, d));
                }
            }
            // Both adjoints are trilinear partials of <gy, conv(x, w)>; their
            // derivatives permute the roles of x, w and gy.
            Op::ConvInputGrad(gy, w, d) => {
                if needs(gy) {
                    acc(gy, self.conv_raw(g, v(w), d));
                }
                if needs(w) {
                    acc(w, self.conv_weight_grad(g, v(gy), d));
                }
            }
            Op::ConvWeightGrad(x, gy, d) => {
                if needs(x) {
                    acc(x, self.conv_input_grad(v(gy), g, d));
                }
                if needs(gy) {
                    acc(gy, self.conv_raw(v(x), g, d));
                }
            }
            Op::Upsample(a) => acc(a, g.sum_pool2x().expect(OK)),
            Op::SumPool(a) => acc(a, g.upsample2x().expect(OK)),
            Op::ScaleGrad(a, f) => acc(a, g.scale(f)),
        }
    }

    fn conv_raw<'g>(&'g self, x: Var<'g, T>, w: Var<'g, T>, d: ConvDims) -> Var<'g, T> {
        let out = kernels::conv2d(self.value(x.id).data(), self.value(w.id).data(), &d);
        self.push(
            Tensor::from_parts(vec![d.batch, d.out_ch, d.out_h, d.out_w], out),
            Op::Conv(x.id, w.id, d),
            &[x.id, w.id],
        )
    }

    fn conv_input_grad<'g>(&'g self, gy: Var<'g, T>, w: Var<'g, T>, d: ConvDims) -> Var<'g, T> {
        let out = kernels::conv2d_input_grad(self.value(gy.id).data(), self.value(w.id).data(), &d);
        self.push(
            Tensor::from_parts(vec![d.batch, d.in_ch, d.in_h, d.in_w], out),
            Op::ConvInputGrad(gy.id, w.id, d),
            &[gy.id, w.id],
        )
    }

    fn conv_weight_grad<'g>(&'g self, x: Var<'g, T>, gy: Var<'g, T>, d: ConvDims) -> Var<'g, T> {
        let out =
            kernels::conv2d_weight_grad(self.value(x.id).data(), self.value(gy.id).data(), &d);
        self.push(
            Tensor::from_parts(vec![d.out_ch, d.in_ch, d.kernel, d.kernel], out),
            Op::ConvWeightGrad(x.id, gy.id, d),
            &[x.id, gy.id],
        )
    }
}

fn rank4(shape: &[usize], what: &str) -> Result<[usize; 4]> {
    match shape {
        &[n, c, h, w] => Ok([n, c, h, w]),
        _ => Err(Error::shape(format!(
            "{what} expects [N, C, H, W], got {shape:?}"
        ))),
    }
}

impl<'g, T: Real> Var<'g, T> {
    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    /// Value of a one-element var as `f64`.
    pub fn to_f64(&self) -> f64 {
        self.value().item().as_f64()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires(self.id)
    }

    /// Same value, cut off from the graph.
    pub fn detach(&self) -> Var<'g, T> {
        self.graph.constant_rc(self.value())
    }

    fn unary(&self, op: Op, f: impl Fn(T) -> T) -> Var<'g, T> {
        let out = self.value().map(f);
        self.graph.push(out, op, &[self.id])
    }

    fn binary(
        &self,
        other: Var<'g, T>,
        op: Op,
        name: &str,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var<'g, T>> {
        let out = self
            .value()
            .zip_map(&other.value(), f)
            .map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("{name}: {m}")),
                e => e,
            })?;
        Ok(self.graph.push(out, op, &[self.id, other.id]))
    }

    pub fn add(&self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.binary(other, Op::Add(self.id, other.id), "add", |a, b| a + b)
    }

    pub fn sub(&self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.binary(other, Op::Sub(self.id, other.id), "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.binary(other, Op::Mul(self.id, other.id), "mul", |a, b| a * b)
    }

    pub fn square(&self) -> Var<'g, T> {
        self.mul(*self).expect("same var")
    }

    /// `x · scale + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Var<'g, T> {
        let (s, b) = (T::lit(scale), T::lit(shift));
        self.unary(Op::Affine(self.id, scale), |x| x * s + b)
    }

    pub fn scale(&self, s: f64) -> Var<'g, T> {
        self.affine(s, 0.0)
    }

    pub fn neg(&self) -> Var<'g, T> {
        self.affine(-1.0, 0.0)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'g, T> {
        self.affine(1.0, c)
    }

    /// Clamped to `[-1 + ulp, 1 - ulp]` so saturation never reaches ±1.
    pub fn tanh(&self) -> Var<'g, T> {
        let hi = T::below_one();
        self.unary(Op::Tanh(self.id), |x| x.tanh().max(-hi).min(hi))
    }

    /// Output kept strictly inside (0, 1) even where the logistic saturates.
    pub fn sigmoid(&self) -> Var<'g, T> {
        let (lo, hi) = (T::min_positive_value(), T::below_one());
        self.unary(Op::Sigmoid(self.id), |x| {
            (T::one() / (T::one() + (-x).exp())).max(lo).min(hi)
        })
    }

    pub fn leaky_relu(&self, slope: f64) -> Var<'g, T> {
        let s = T::lit(slope);
        self.unary(Op::LeakyRelu(self.id, slope), |x| {
            if x > T::zero() {
                x
            } else {
                x * s
            }
        })
    }

    pub fn abs(&self) -> Var<'g, T> {
        self.unary(Op::Abs(self.id), |x| x.abs())
    }

    pub fn log(&self) -> Var<'g, T> {
        self.unary(Op::Log(self.id), |x| x.ln())
    }

    pub fn sqrt(&self) -> Var<'g, T> {
        self.unary(Op::Sqrt(self.id), |x| x.sqrt())
    }

    pub fn recip(&self) -> Var<'g, T> {
        self.unary(Op::Recip(self.id), |x| x.recip())
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Var<'g, T> {
        let (l, h) = (T::lit(lo), T::lit(hi));
        self.unary(Op::Clamp(self.id, lo, hi), |x| x.max(l).min(h))
    }

    /// Identity forward; backward multiplies the incoming gradient by `factor`.
    pub fn scale_grad(&self, factor: f64) -> Var<'g, T> {
        self.unary(Op::ScaleGrad(self.id, factor), |x| x)
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Var<'g, T>> {
        let out = self.value().reshape(shape)?;
        Ok(self.graph.push(out, Op::Reshape(self.id), &[self.id]))
    }

    pub fn sum_middle(&self, f: Fold) -> Result<Var<'g, T>> {
        let v = self.value();
        if v.numel() != f.outer * f.mid * f.inner {
            return Err(Error::shape(format!(
                "sum_middle: {f:?} does not fold {:?}",
                v.shape()
            )));
        }
        let out = kernels::sum_middle(v.data(), f.outer, f.mid, f.inner);
        Ok(self.graph.push(
            Tensor::from_parts(vec![f.outer, 1, f.inner], out),
            Op::SumMiddle(self.id, f),
            &[self.id],
        ))
    }

    pub fn broadcast_middle(&self, f: Fold) -> Result<Var<'g, T>> {
        let v = self.value();
        if v.numel() != f.outer * f.inner {
            return Err(Error::shape(format!(
                "broadcast_middle: {f:?} does not fit {:?}",
                v.shape()
            )));
        }
        let out = kernels::broadcast_middle(v.data(), f.outer, f.mid, f.inner);
        Ok(self.graph.push(
            Tensor::from_parts(vec![f.outer, f.mid, f.inner], out),
            Op::BroadcastMiddle(self.id, f),
            &[self.id],
        ))
    }

    /// Sum of all elements, as a rank-0 var.
    pub fn sum(&self) -> Var<'g, T> {
        let n = self.value().numel();
        self.reshape([1, n, 1])
            .and_then(|v| {
                v.sum_middle(Fold {
                    outer: 1,
                    mid: n,
                    inner: 1,
                })
            })
            .and_then(|v| v.reshape(Vec::new()))
            .expect("full reduction")
    }

    pub fn mean(&self) -> Var<'g, T> {
        let n = self.value().numel();
        self.sum().scale(1.0 / n as f64)
    }

    /// Repeat a one-element var to `shape`.
    pub fn expand_scalar(&self, shape: impl Into<Vec<usize>>) -> Result<Var<'g, T>> {
        let shape = shape.into();
        if self.value().numel() != 1 {
            return Err(Error::shape("expand_scalar on non-scalar"));
        }
        let n: usize = shape.iter().product();
        self.reshape([1, 1, 1])?
            .broadcast_middle(Fold {
                outer: 1,
                mid: n,
                inner: 1,
            })?
            .reshape(shape)
    }

    /// Sum over everything but the leading axis: `[N, ...] -> [N]`.
    pub fn sum_per_item(&self) -> Result<Var<'g, T>> {
        let shape = self.shape();
        let n = *shape
            .first()
            .ok_or_else(|| Error::shape("sum_per_item on rank-0"))?;
        let rest = self.value().numel() / n;
        self.reshape([n, rest, 1])?
            .sum_middle(Fold {
                outer: n,
                mid: rest,
                inner: 1,
            })?
            .reshape([n])
    }

    pub fn matmul(&self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        let (a, b) = (self.value(), other.value());
        let (m, k, k2, n) = match (a.shape(), b.shape()) {
            (&[m, k], &[k2, n]) => (m, k, k2, n),
            (sa, sb) => {
                return Err(Error::shape(format!(
                    "matmul expects two matrices, got {sa:?} and {sb:?}"
                )))
            }
        };
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner dimensions differ: [{m}, {k}] x [{k2}, {n}]"
            )));
        }
        let out = kernels::matmul(a.data(), b.data(), m, k, n);
        Ok(self.graph.push(
            Tensor::from_parts(vec![m, n], out),
            Op::MatMul(self.id, other.id),
            &[self.id, other.id],
        ))
    }

    pub fn transpose(&self) -> Result<Var<'g, T>> {
        let a = self.value();
        let &[r, c] = a.shape() else {
            return Err(Error::shape(format!(
                "transpose expects a matrix, got {:?}",
                a.shape()
            )));
        };
        let out = kernels::transpose(a.data(), r, c);
        Ok(self.graph.push(
            Tensor::from_parts(vec![c, r], out),
            Op::Transpose(self.id),
            &[self.id],
        ))
    }

    /// Affine map `x · w + b` with `x: [N, D]`, `w: [D, M]`, `b: [M]`.
    pub fn dense(&self, w: Var<'g, T>, b: Var<'g, T>) -> Result<Var<'g, T>> {
        let y = self.matmul(w)?;
        y.add_row_bias(b)
    }

    /// `[N, M] + [M]`.
    pub fn add_row_bias(&self, b: Var<'g, T>) -> Result<Var<'g, T>> {
        let shape = self.shape();
        let &[n, m] = shape.as_slice() else {
            return Err(Error::shape(format!(
                "row bias needs [N, M], got {shape:?}"
            )));
        };
        if b.shape() != [m] {
            return Err(Error::shape(format!(
                "bias {:?} does not match width {m}",
                b.shape()
            )));
        }
        let bb = b
            .reshape([1, 1, m])?
            .broadcast_middle(Fold {
                outer: 1,
                mid: n,
                inner: m,
            })?
            .reshape([n, m])?;
        self.add(bb)
    }

    /// `[N, C, H, W] + [C]`.
    pub fn add_channel_bias(&self, b: Var<'g, T>) -> Result<Var<'g, T>> {
        let [n, c, h, w] = rank4(&self.shape(), "channel bias")?;
        if b.shape() != [c] {
            return Err(Error::shape(format!(
                "bias {:?} does not match {c} channels",
                b.shape()
            )));
        }
        let bb = b
            .reshape([1, 1, c])?
            .broadcast_middle(Fold {
                outer: 1,
                mid: n,
                inner: c,
            })?
            .reshape([n * c, 1, 1])?
            .broadcast_middle(Fold {
                outer: n * c,
                mid: h * w,
                inner: 1,
            })?
            .reshape([n, c, h, w])?;
        self.add(bb)
    }

    /// Cross-correlation of `[N, C, H, W]` with a `[K, C, k, k]` kernel.
    pub fn conv2d(&self, kernel: Var<'g, T>, geom: ConvGeom) -> Result<Var<'g, T>> {
        let [n, c, h, w] = rank4(&self.shape(), "conv2d input")?;
        let [k_out, k_in, kh, kw] = rank4(&kernel.shape(), "conv2d kernel")?;
        if k_in != c {
            return Err(Error::shape(format!(
                "conv2d: input has {c} channels but kernel [{k_out}, {k_in}, {kh}, {kw}] expects {k_in}"
            )));
        }
        if kh != kw {
            return Err(Error::shape(format!(
                "conv2d: only square kernels, got {kh}x{kw}"
            )));
        }
        let (Some(out_h), Some(out_w)) = (
            conv_out_dim(h, kh, geom.stride, geom.pad),
            conv_out_dim(w, kw, geom.stride, geom.pad),
        ) else {
            return Err(Error::shape(format!(
                "conv2d: kernel {kh} stride {} pad {} does not fit {h}x{w}",
                geom.stride, geom.pad
            )));
        };
        let d = ConvDims {
            batch: n,
            in_ch: c,
            in_h: h,
            in_w: w,
            out_ch: k_out,
            kernel: kh,
            stride: geom.stride,
            pad: geom.pad,
            out_h,
            out_w,
        };
        Ok(self.graph.conv_raw(*self, kernel, d))
    }

    pub fn upsample2x(&self) -> Result<Var<'g, T>> {
        let [n, c, h, w] = rank4(&self.shape(), "upsample2x")?;
        let out = kernels::upsample2x(self.value().data(), n * c, h, w);
        Ok(self.graph.push(
            Tensor::from_parts(vec![n, c, 2 * h, 2 * w], out),
            Op::Upsample(self.id),
            &[self.id],
        ))
    }

    pub fn sum_pool2x(&self) -> Result<Var<'g, T>> {
        let [n, c, h, w] = rank4(&self.shape(), "sum_pool2x")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape(format!(
                "sum_pool2x needs even dims, got {h}x{w}"
            )));
        }
        let out = kernels::sum_pool2x(self.value().data(), n * c, h / 2, w / 2);
        Ok(self.graph.push(
            Tensor::from_parts(vec![n, c, h / 2, w / 2], out),
            Op::SumPool(self.id),
            &[self.id],
        ))
    }

    /// Replace each spatial position's channel vector `a` with `a / sqrt(mean(a²) + eps)`.
    pub fn pixel_norm(&self, eps: f64) -> Result<Var<'g, T>> {
        let [n, c, h, w] = rank4(&self.shape(), "pixel_norm")?;
        let fold = Fold {
            outer: n,
            mid: c,
            inner: h * w,
        };
        let inv = self
            .square()
            .sum_middle(fold)?
            .affine(1.0 / c as f64, eps)
            .sqrt()
            .recip()
            .broadcast_middle(fold)?
            .reshape([n, c, h, w])?;
        self.mul(inv)
    }
}

impl<T: Real> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}
