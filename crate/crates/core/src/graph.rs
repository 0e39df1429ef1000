//! Reverse-mode automatic differentiation over a node arena.
//!
//! Values are computed eagerly as nodes are pushed. [`Graph::grad`] walks the arena
//! backwards and expresses every gradient as new graph nodes, so gradients of built-in
//! ops can themselves be differentiated (needed for gradient penalties). Ops registered
//! through [`CustomOp`] produce constant gradients and only support first order.

use alloc::boxed::Box;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::{self, ConvGeom};
use crate::math;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Multiplier applied by [`Op::Mask`], chosen from the sign of a source tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaskKind {
    /// `1` where the source is positive, `slope` elsewhere.
    Leaky(f32),
    /// `sign(source)`, with `sign(0) = 0`.
    Sign,
}

impl MaskKind {
    #[inline]
    fn factor(self, src: f32) -> f32 {
        match self {
            MaskKind::Leaky(slope) => {
                if src > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            MaskKind::Sign => {
                if src > 0.0 {
                    1.0
                } else if src < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvKind {
    /// `(x, w) -> y`
    Output,
    /// `(w, y) -> x`
    Input,
    /// `(x, y) -> w`
    Weight,
}

/// First-order op with a hand-written backward pass.
pub trait CustomOp {
    fn name(&self) -> &'static str;

    /// Gradients with respect to each input, `None` for non-differentiable inputs.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>>;
}

#[derive(Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    AddScalar(Var),
    Square(Var),
    Recip(Var),
    Sqrt(Var),
    Tanh(Var),
    Mask { x: Var, src: Var, kind: MaskKind },
    Sum(Var),
    Expand(Var),
    SumRows(Var),
    ExpandRows(Var),
    SumChannels(Var),
    ExpandChannels(Var),
    Reshape(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Conv { kind: ConvKind, a: Var, b: Var, geom: ConvGeom },
    Gather { x: Var, index: Rc<[u32]> },
    ScatterAdd { x: Var, index: Rc<[u32]> },
    Custom { inputs: Vec<Var>, op: Rc<dyn CustomOp> },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::Conv { a, b, .. } => vec![*a, *b],
            Op::Mask { x, .. } => vec![*x],
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Square(a)
            | Op::Recip(a)
            | Op::Sqrt(a)
            | Op::Tanh(a)
            | Op::Sum(a)
            | Op::Expand(a)
            | Op::SumRows(a)
            | Op::ExpandRows(a)
            | Op::SumChannels(a)
            | Op::ExpandChannels(a)
            | Op::Reshape(a)
            | Op::Transpose(a) => vec![*a],
            Op::Gather { x, .. } | Op::ScatterAdd { x, .. } => vec![*x],
            Op::Custom { inputs, .. } => inputs.clone(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Input or parameter; whether it is differentiated is decided by [`Graph::grad`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p + q);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p - q);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |p, q| p * q);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Var {
        let v = self.value(a).map(|p| p * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f32) -> Var {
        let v = self.value(a).map(|p| p + s);
        self.push(v, Op::AddScalar(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|p| p * p);
        self.push(v, Op::Square(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|p| 1.0 / p);
        self.push(v, Op::Recip(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(math::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(math::tanh);
        self.push(v, Op::Tanh(a))
    }

    /// `x * m(src)` elementwise; `src` is not differentiated.
    pub fn mask(&mut self, x: Var, src: Var, kind: MaskKind) -> Var {
        let v = self.value(x).zip_map(self.value(src), |p, s| p * kind.factor(s));
        self.push(v, Op::Mask { x, src, kind })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.mask(x, x, MaskKind::Leaky(0.0))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f32) -> Var {
        self.mask(x, x, MaskKind::Leaky(slope))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.mask(x, x, MaskKind::Sign)
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f32;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Broadcast a one-element tensor to `shape`.
    pub fn expand(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = Tensor::full(shape, self.value(a).item());
        self.push(v, Op::Expand(a))
    }

    /// `[N, ...] -> [N]`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = t.shape()[0];
        let inner = t.len() / n;
        let data = t.data().chunks(inner).map(|c| c.iter().sum()).collect();
        self.push(Tensor::new(&[n], data), Op::SumRows(a))
    }

    /// `[N] -> shape` with `shape[0] = N`.
    pub fn expand_rows(&mut self, a: Var, shape: &[usize]) -> Var {
        let t = self.value(a);
        assert_eq!(t.shape(), &[shape[0]]);
        let inner: usize = shape[1..].iter().product();
        let mut data = Vec::with_capacity(shape[0] * inner);
        for &r in t.data() {
            data.extend(core::iter::repeat_n(r, inner));
        }
        self.push(Tensor::new(shape, data), Op::ExpandRows(a))
    }

    /// `[N, C, ...] -> [C]`.
    pub fn sum_channels(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (n, c) = (t.shape()[0], t.shape()[1]);
        let inner: usize = t.shape()[2..].iter().product();
        let mut data = vec![0.0f32; c];
        for b in 0..n {
            for (ch, acc) in data.iter_mut().enumerate() {
                *acc += t.data()[(b * c + ch) * inner..][..inner].iter().sum::<f32>();
            }
        }
        self.push(Tensor::new(&[c], data), Op::SumChannels(a))
    }

    /// `[C] -> shape` with `shape[1] = C`.
    pub fn expand_channels(&mut self, a: Var, shape: &[usize]) -> Var {
        let t = self.value(a);
        let (n, c) = (shape[0], shape[1]);
        assert_eq!(t.shape(), &[c], "channel broadcast mismatch");
        let inner: usize = shape[2..].iter().product();
        let mut data = Vec::with_capacity(n * c * inner);
        for _ in 0..n {
            for &v in t.data() {
                data.extend(core::iter::repeat_n(v, inner));
            }
        }
        self.push(Tensor::new(shape, data), Op::ExpandChannels(a))
    }

    /// `x + b` with `b: [C]` broadcast along axis 1.
    pub fn add_channel_bias(&mut self, x: Var, b: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let e = self.expand_channels(b, &shape);
        self.add(x, e)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = self.value(a).clone().reshaped(shape);
        self.push(v, Op::Reshape(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = kernels::matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = kernels::transpose(self.value(a));
        self.push(v, Op::Transpose(a))
    }

    /// One of the three convolution contractions; see [`crate::kernels`].
    pub fn conv(&mut self, kind: ConvKind, a: Var, b: Var, geom: ConvGeom) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        let v = match kind {
            ConvKind::Output => kernels::conv_output(ta, tb, &geom),
            ConvKind::Input => kernels::conv_input(ta, tb, &geom),
            ConvKind::Weight => kernels::conv_weight(ta, tb, &geom),
        };
        self.push(v, Op::Conv { kind, a, b, geom })
    }

    pub fn conv1d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let geom = ConvGeom::conv1d(self.shape(x), self.shape(w), stride, pad);
        self.conv(ConvKind::Output, x, w, geom)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let geom = ConvGeom::conv2d(self.shape(x), self.shape(w), stride, pad);
        self.conv(ConvKind::Output, x, w, geom)
    }

    /// Transposed 1-D convolution, weight layout `[Cin, Cout, K]`.
    pub fn conv_transpose1d(&mut self, x: Var, w: Var, stride: usize, pad: usize, output_padding: usize) -> Var {
        let geom = ConvGeom::conv_transpose1d(self.shape(x), self.shape(w), stride, pad, output_padding);
        self.conv(ConvKind::Input, w, x, geom)
    }

    /// `out[i] = x.flat[index[i]]`, reshaped to `shape`.
    pub fn gather(&mut self, x: Var, index: Rc<[u32]>, shape: &[usize]) -> Var {
        let src = self.value(x).data();
        let data = index.iter().map(|&i| src[i as usize]).collect();
        self.push(Tensor::new(shape, data), Op::Gather { x, index })
    }

    /// `out.flat[index[i]] += x.flat[i]`, output of `shape`.
    pub fn scatter_add(&mut self, x: Var, index: Rc<[u32]>, shape: &[usize]) -> Var {
        let mut out = Tensor::zeros(shape);
        {
            let o = out.data_mut();
            for (&i, &v) in index.iter().zip(self.value(x).data()) {
                o[i as usize] += v;
            }
        }
        self.push(out, Op::ScatterAdd { x, index })
    }

    /// Register a node whose forward value was computed by the caller.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, op: Rc<dyn CustomOp>) -> Var {
        self.push(output, Op::Custom { inputs: inputs.to_vec(), op })
    }

    pub fn custom_boxed(&mut self, inputs: &[Var], output: Tensor, op: Box<dyn CustomOp>) -> Var {
        self.custom(inputs, output, Rc::from(op))
    }

    /// Gradients of the scalar `root` with respect to `wrt`.
    ///
    /// Only nodes on a path from `wrt` to `root` are visited. With `create_graph`, the
    /// returned gradients can be differentiated again; this panics if the path crosses
    /// a [`CustomOp`].
    pub fn grad(&mut self, root: Var, wrt: &[Var], create_graph: bool) -> Vec<Var> {
        assert_eq!(self.value(root).len(), 1, "grad root must be a scalar");
        let n = root.0 + 1;
        let mut depends = vec![false; n];
        for w in wrt {
            if w.0 < n {
                depends[w.0] = true;
            }
        }
        for i in 0..n {
            if !depends[i] {
                depends[i] = self.nodes[i].op.parents().iter().any(|p| depends[p.0]);
            }
        }
        let mut grads: Vec<Option<Var>> = vec![None; n];
        if depends[root.0] {
            let seed = Tensor::full(self.shape(root), 1.0);
            grads[root.0] = Some(self.leaf(seed));
        }
        for i in (0..n).rev() {
            if !depends[i] {
                continue;
            }
            let Some(g) = grads[i] else { continue };
            let op = self.nodes[i].op.clone();
            for (parent, contribution) in self.backward_op(Var(i), &op, g, &depends, create_graph) {
                grads[parent.0] = Some(match grads[parent.0] {
                    None => contribution,
                    Some(prev) => self.add(prev, contribution),
                });
            }
        }
        wrt.iter()
            .map(|w| match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let z = Tensor::zeros(self.shape(*w));
                    self.leaf(z)
                }
            })
            .collect()
    }

    fn backward_op(&mut self, out: Var, op: &Op, g: Var, depends: &[bool], create_graph: bool) -> Vec<(Var, Var)> {
        let wants = |v: &Var| depends[v.0];
        let mut res = Vec::new();
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if wants(&a) {
                    res.push((a, g));
                }
                if wants(&b) {
                    res.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if wants(&a) {
                    res.push((a, g));
                }
                if wants(&b) {
                    res.push((b, self.scale(g, -1.0)));
                }
            }
            Op::Mul(a, b) => {
                if wants(&a) {
                    res.push((a, self.mul(g, b)));
                }
                if wants(&b) {
                    res.push((b, self.mul(g, a)));
                }
            }
            Op::Scale(a, s) => res.push((a, self.scale(g, s))),
            Op::AddScalar(a) => res.push((a, g)),
            Op::Square(a) => {
                let two_a = self.scale(a, 2.0);
                res.push((a, self.mul(g, two_a)));
            }
            Op::Recip(a) => {
                let sq = self.square(out);
                let neg = self.scale(sq, -1.0);
                res.push((a, self.mul(g, neg)));
            }
            Op::Sqrt(a) => {
                let r = self.recip(out);
                let half = self.scale(r, 0.5);
                res.push((a, self.mul(g, half)));
            }
            Op::Tanh(a) => {
                let sq = self.square(out);
                let neg = self.scale(sq, -1.0);
                let d = self.add_scalar(neg, 1.0);
                res.push((a, self.mul(g, d)));
            }
            Op::Mask { x, src, kind } => res.push((x, self.mask(g, src, kind))),
            Op::Sum(a) => {
                let shape = self.shape(a).to_vec();
                res.push((a, self.expand(g, &shape)));
            }
            Op::Expand(a) => {
                let s = self.sum(g);
                let shape = self.shape(a).to_vec();
                res.push((a, self.reshape(s, &shape)));
            }
            Op::SumRows(a) => {
                let shape = self.shape(a).to_vec();
                res.push((a, self.expand_rows(g, &shape)));
            }
            Op::ExpandRows(a) => res.push((a, self.sum_rows(g))),
            Op::SumChannels(a) => {
                let shape = self.shape(a).to_vec();
                res.push((a, self.expand_channels(g, &shape)));
            }
            Op::ExpandChannels(a) => res.push((a, self.sum_channels(g))),
            Op::Reshape(a) => {
                let shape = self.shape(a).to_vec();
                res.push((a, self.reshape(g, &shape)));
            }
            Op::MatMul(a, b) => {
                if wants(&a) {
                    let bt = self.transpose(b);
                    res.push((a, self.matmul(g, bt)));
                }
                if wants(&b) {
                    let at = self.transpose(a);
                    res.push((b, self.matmul(at, g)));
                }
            }
            Op::Transpose(a) => res.push((a, self.transpose(g))),
            Op::Conv { kind, a, b, geom } => {
                let (ga, gb) = match kind {
                    ConvKind::Output => (
                        wants(&a).then(|| self.conv(ConvKind::Input, b, g, geom)),
                        wants(&b).then(|| self.conv(ConvKind::Weight, a, g, geom)),
                    ),
                    ConvKind::Input => (
                        wants(&a).then(|| self.conv(ConvKind::Weight, g, b, geom)),
                        wants(&b).then(|| self.conv(ConvKind::Output, g, a, geom)),
                    ),
                    ConvKind::Weight => (
                        wants(&a).then(|| self.conv(ConvKind::Input, g, b, geom)),
                        wants(&b).then(|| self.conv(ConvKind::Output, a, g, geom)),
                    ),
                };
                if let Some(ga) = ga {
                    res.push((a, ga));
                }
                if let Some(gb) = gb {
                    res.push((b, gb));
                }
            }
            Op::Gather { x, ref index } => {
                let shape = self.shape(x).to_vec();
                res.push((x, self.scatter_add(g, index.clone(), &shape)));
            }
            Op::ScatterAdd { x, ref index } => {
                let shape = self.shape(x).to_vec();
                res.push((x, self.gather(g, index.clone(), &shape)));
            }
            Op::Custom { ref inputs, ref op } => {
                assert!(!create_graph, "higher-order gradient requested through custom op `{}`", op.name());
                let grads = {
                    let ins: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                    op.backward(&ins, self.value(out), self.value(g))
                };
                for (input, grad) in inputs.iter().zip(grads) {
                    if let (true, Some(t)) = (wants(input), grad) {
                        res.push((*input, self.leaf(t)));
                    }
                }
            }
        }
        res
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape, data.to_vec())
    }

    /// Central finite differences of `f` at `x`, in f64 for stability of the oracle.
    fn numeric_grad(f: &dyn Fn(&Tensor) -> f64, x: &Tensor, h: f32) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut p = x.clone();
                p.data_mut()[i] += h;
                let mut m = x.clone();
                m.data_mut()[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h as f64)
            })
            .collect()
    }

    fn close(a: &[f32], b: &[f64], tol: f64) {
        for (i, (&p, &q)) in a.iter().zip(b).enumerate() {
            assert!((p as f64 - q).abs() <= tol * (1.0 + q.abs()), "index {i}: {p} vs {q}");
        }
    }

    fn smooth_net(g: &mut Graph, x: Var, w: Var) -> Var {
        let y = g.conv1d(x, w, 2, 1);
        let y = g.tanh(y);
        let y = g.square(y);
        let y = g.add_scalar(y, 0.5);
        let y = g.sqrt(y);
        let s = g.sum_rows(y);
        let r = g.recip(s);
        g.sum(r)
    }

    #[test]
    fn first_order_matches_finite_differences() {
        let x0 = t(&[2, 2, 7], &(0..28).map(|i| (i as f32 * 0.37).sin()).collect::<Vec<_>>());
        let w0 = t(&[3, 2, 3], &(0..18).map(|i| (i as f32 * 0.71).cos() * 0.5).collect::<Vec<_>>());
        let mut g = Graph::new();
        let x = g.leaf(x0.clone());
        let w = g.leaf(w0.clone());
        let root = smooth_net(&mut g, x, w);
        let grads = g.grad(root, &[x, w], false);
        let fx = |xv: &Tensor| {
            let mut g = Graph::new();
            let (x, w) = (g.leaf(xv.clone()), g.leaf(w0.clone()));
            let r = smooth_net(&mut g, x, w);
            g.value(r).item() as f64
        };
        let fw = |wv: &Tensor| {
            let mut g = Graph::new();
            let (x, w) = (g.leaf(x0.clone()), g.leaf(wv.clone()));
            let r = smooth_net(&mut g, x, w);
            g.value(r).item() as f64
        };
        close(g.value(grads[0]).data(), &numeric_grad(&fx, &x0, 1e-3), 2e-2);
        close(g.value(grads[1]).data(), &numeric_grad(&fw, &w0, 1e-3), 2e-2);
    }

    /// Gradient-penalty shaped objective: `‖∂f/∂x‖²` differentiated with respect to `w`.
    fn penalty(g: &mut Graph, x: Var, w: Var, v: Var) -> Var {
        let y = g.conv1d(x, w, 1, 1);
        let y = g.leaky_relu(y, 0.2);
        let y = g.tanh(y);
        let flat = g.reshape(y, &[1, 8]);
        let o = g.matmul(flat, v);
        let s = g.sum(o);
        let dx = g.grad(s, &[x], true)[0];
        let sq = g.square(dx);
        g.sum(sq)
    }

    #[test]
    fn second_order_matches_finite_differences() {
        let x0 = t(&[1, 2, 4], &[0.3, -0.2, 0.5, 0.1, -0.4, 0.6, 0.2, -0.1]);
        let w0 = t(&[2, 2, 3], &[0.5, -0.3, 0.2, 0.1, 0.4, -0.6, -0.2, 0.3, 0.7, -0.5, 0.1, 0.2]);
        let v0 = t(&[8, 1], &[0.3, -0.1, 0.4, 0.2, -0.5, 0.6, 0.1, -0.2]);
        let mut g = Graph::new();
        let (x, w, v) = (g.leaf(x0.clone()), g.leaf(w0.clone()), g.leaf(v0.clone()));
        let root = penalty(&mut g, x, w, v);
        let gw = g.grad(root, &[w], false)[0];
        let f = |wv: &Tensor| {
            let mut g = Graph::new();
            let (x, w, v) = (g.leaf(x0.clone()), g.leaf(wv.clone()), g.leaf(v0.clone()));
            let r = penalty(&mut g, x, w, v);
            g.value(r).item() as f64
        };
        close(g.value(gw).data(), &numeric_grad(&f, &w0, 1e-3), 2e-2);
    }

    #[test]
    fn gather_scatter_are_adjoint() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[4], &[1.0, 2.0, 3.0, 4.0]));
        let idx: Rc<[u32]> = Rc::from(vec![1u32, 0, 1, 3]);
        let y = g.gather(x, idx, &[4]);
        assert_eq!(g.value(y).data(), &[2.0, 1.0, 2.0, 4.0]);
        let s = g.sum(y);
        let gx = g.grad(s, &[x], false)[0];
        assert_eq!(g.value(gx).data(), &[1.0, 2.0, 0.0, 1.0]);
    }

    #[test]
    fn unrelated_inputs_get_zero_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2], &[1.0, 2.0]));
        let b = g.leaf(t(&[2], &[3.0, 4.0]));
        let s = g.sum(a);
        let gb = g.grad(s, &[b], false)[0];
        assert_eq!(g.value(gb).data(), &[0.0, 0.0]);
    }
}
