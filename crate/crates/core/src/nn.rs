//! Parameter storage, layers and the Adam optimizer.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{CustomOp, Graph, Var};
use crate::math;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    /// Buffers (running statistics) are stored but never optimized.
    pub trainable: bool,
}

/// Named, ordered collection of a model's tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(self.entries.iter().all(|e| e.name != name), "duplicate parameter {name}");
        self.entries.push(ParamEntry { name, tensor, trainable });
        ParamId(self.entries.len() - 1)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn trainable_ids(&self) -> Vec<ParamId> {
        (0..self.entries.len()).filter(|&i| self.entries[i].trainable).map(ParamId).collect()
    }

    pub fn num_trainable(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.tensor.len()).sum()
    }

    /// Replace tensor values from `(name, tensor)` pairs; names and shapes must match exactly.
    pub fn load_values(&mut self, values: Vec<(String, Tensor)>) -> Result<(), String> {
        if values.len() != self.entries.len() {
            return Err(format!("expected {} tensors, found {}", self.entries.len(), values.len()));
        }
        for (name, t) in values {
            let entry =
                self.entries.iter_mut().find(|e| e.name == name).ok_or_else(|| format!("unexpected tensor {name}"))?;
            if entry.tensor.shape() != t.shape() {
                return Err(format!("tensor {name}: expected shape {:?}, found {:?}", entry.tensor.shape(), t.shape()));
            }
            entry.tensor = t;
        }
        Ok(())
    }

    pub fn bind(&self, g: &mut Graph, train: bool) -> Bound<'_> {
        let vars =
            self.entries.iter().map(|e| if e.trainable { Some(g.leaf(e.tensor.clone())) } else { None }).collect();
        Bound { params: self, vars, train, updates: Vec::new() }
    }

    pub fn apply_updates(&mut self, updates: Vec<(ParamId, Tensor)>) {
        for (id, t) in updates {
            self.entries[id.0].tensor = t;
        }
    }
}

/// A [`ParamSet`] placed into a graph for one forward pass.
pub struct Bound<'a> {
    pub params: &'a ParamSet,
    vars: Vec<Option<Var>>,
    /// Training mode: batch statistics in normalization layers.
    pub train: bool,
    updates: Vec<(ParamId, Tensor)>,
}

impl Bound<'_> {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0].expect("buffer used as a graph variable")
    }

    pub fn trainable_vars(&self) -> Vec<(ParamId, Var)> {
        self.vars.iter().enumerate().filter_map(|(i, v)| v.map(|v| (ParamId(i), v))).collect()
    }

    pub fn record_update(&mut self, id: ParamId, value: Tensor) {
        self.updates.push((id, value));
    }

    /// Buffer updates produced during the pass (running statistics).
    pub fn take_updates(&mut self) -> Vec<(ParamId, Tensor)> {
        core::mem::take(&mut self.updates)
    }
}

fn uniform(shape: &[usize], bound: f32, rng: &mut (impl Rng + ?Sized)) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-bound..=bound)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    w: ParamId,
    b: ParamId,
}

impl Linear {
    pub fn new(ps: &mut ParamSet, name: &str, input: usize, output: usize, rng: &mut (impl Rng + ?Sized)) -> Self {
        let bound = 1.0 / math::sqrt(input as f32);
        let w = ps.add(format!("{name}.weight"), uniform(&[input, output], bound, rng), true);
        let b = ps.add(format!("{name}.bias"), uniform(&[output], bound, rng), true);
        Self { w, b }
    }

    /// `[N, in] -> [N, out]`
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let y = g.matmul(x, p.var(self.w));
        g.add_channel_bias(y, p.var(self.b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    w: ParamId,
    b: ParamId,
    stride: usize,
    pad: usize,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Self {
        let bound = 1.0 / math::sqrt((in_ch * kernel) as f32);
        let w = ps.add(format!("{name}.weight"), uniform(&[out_ch, in_ch, kernel], bound, rng), true);
        let b = ps.add(format!("{name}.bias"), uniform(&[out_ch], bound, rng), true);
        Self { w, b, stride, pad }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let y = g.conv1d(x, p.var(self.w), self.stride, self.pad);
        g.add_channel_bias(y, p.var(self.b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvTranspose1d {
    w: ParamId,
    b: ParamId,
    stride: usize,
    pad: usize,
    output_padding: usize,
}

impl ConvTranspose1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        output_padding: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Self {
        let bound = 1.0 / math::sqrt((out_ch * kernel) as f32);
        let w = ps.add(format!("{name}.weight"), uniform(&[in_ch, out_ch, kernel], bound, rng), true);
        let b = ps.add(format!("{name}.bias"), uniform(&[out_ch], bound, rng), true);
        Self { w, b, stride, pad, output_padding }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let y = g.conv_transpose1d(x, p.var(self.w), self.stride, self.pad, self.output_padding);
        g.add_channel_bias(y, p.var(self.b))
    }
}

/// Bias-free 2-D convolution (always followed by normalization here).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    w: ParamId,
    stride: usize,
    pad: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Self {
        let bound = 1.0 / math::sqrt((in_ch * kernel * kernel) as f32);
        let w = ps.add(format!("{name}.weight"), uniform(&[out_ch, in_ch, kernel, kernel], bound, rng), true);
        Self { w, stride, pad }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        g.conv2d(x, p.var(self.w), self.stride, self.pad)
    }
}

const BN_EPS: f32 = 1e-5;
const BN_MOMENTUM: f32 = 0.1;

/// Per-channel batch normalization over `[N, C, ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    gamma: ParamId,
    beta: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
}

struct BatchNormOp {
    /// Normalized input `x̂`.
    normalized: Tensor,
    inv_std: Vec<f32>,
    gamma: Vec<f32>,
    /// Gradient flows through batch statistics.
    batch_stats: bool,
}

impl CustomOp for BatchNormOp {
    fn name(&self) -> &'static str {
        "batch_norm"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>> {
        let shape = grad.shape();
        let (n, c) = (shape[0], shape[1]);
        let inner: usize = shape[2..].iter().product();
        let m = (n * inner) as f32;
        let (gd, xh) = (grad.data(), self.normalized.data());
        let mut dgamma = vec![0.0f32; c];
        let mut dbeta = vec![0.0f32; c];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * inner;
                for i in off..off + inner {
                    dbeta[ch] += gd[i];
                    dgamma[ch] += gd[i] * xh[i];
                }
            }
        }
        let mut dx = vec![0.0f32; grad.len()];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * inner;
                let k = self.gamma[ch] * self.inv_std[ch];
                for i in off..off + inner {
                    dx[i] =
                        if self.batch_stats { k * (gd[i] - dbeta[ch] / m - xh[i] * dgamma[ch] / m) } else { k * gd[i] };
                }
            }
        }
        vec![Some(Tensor::new(shape, dx)), Some(Tensor::new(&[c], dgamma)), Some(Tensor::new(&[c], dbeta))]
    }
}

impl BatchNorm {
    pub fn new(ps: &mut ParamSet, name: &str, channels: usize) -> Self {
        Self {
            gamma: ps.add(format!("{name}.gamma"), Tensor::full(&[channels], 1.0), true),
            beta: ps.add(format!("{name}.beta"), Tensor::zeros(&[channels]), true),
            running_mean: ps.add(format!("{name}.running_mean"), Tensor::zeros(&[channels]), false),
            running_var: ps.add(format!("{name}.running_var"), Tensor::full(&[channels], 1.0), false),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &mut Bound, x: Var) -> Var {
        let (gv, bv) = (p.var(self.gamma), p.var(self.beta));
        let xt = g.value(x);
        let shape = xt.shape().to_vec();
        let (n, c) = (shape[0], shape[1]);
        let inner: usize = shape[2..].iter().product();
        let m = n * inner;
        let (mean, var) = if p.train {
            let mut mean = vec![0.0f64; c];
            let mut sq = vec![0.0f64; c];
            for b in 0..n {
                for ch in 0..c {
                    for &v in &xt.data()[(b * c + ch) * inner..][..inner] {
                        mean[ch] += v as f64;
                        sq[ch] += v as f64 * v as f64;
                    }
                }
            }
            let mean: Vec<f32> = mean.iter().map(|s| (s / m as f64) as f32).collect();
            let var: Vec<f32> =
                sq.iter().zip(&mean).map(|(s, &mu)| ((s / m as f64) - mu as f64 * mu as f64).max(0.0) as f32).collect();
            let unbias = if m > 1 { m as f32 / (m - 1) as f32 } else { 1.0 };
            let rm: Vec<f32> = p
                .params
                .tensor(self.running_mean)
                .data()
                .iter()
                .zip(&mean)
                .map(|(&r, &mu)| (1.0 - BN_MOMENTUM) * r + BN_MOMENTUM * mu)
                .collect();
            let rv: Vec<f32> = p
                .params
                .tensor(self.running_var)
                .data()
                .iter()
                .zip(&var)
                .map(|(&r, &v)| (1.0 - BN_MOMENTUM) * r + BN_MOMENTUM * v * unbias)
                .collect();
            p.record_update(self.running_mean, Tensor::new(&[c], rm));
            p.record_update(self.running_var, Tensor::new(&[c], rv));
            (mean, var)
        } else {
            (p.params.tensor(self.running_mean).data().to_vec(), p.params.tensor(self.running_var).data().to_vec())
        };
        let inv_std: Vec<f32> = var.iter().map(|&v| 1.0 / math::sqrt(v + BN_EPS)).collect();
        let gamma = g.value(gv).data().to_vec();
        let beta = g.value(bv).data().to_vec();
        let xt = g.value(x);
        let mut normalized = vec![0.0f32; xt.len()];
        let mut out = vec![0.0f32; xt.len()];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * inner;
                for i in off..off + inner {
                    let h = (xt.data()[i] - mean[ch]) * inv_std[ch];
                    normalized[i] = h;
                    out[i] = gamma[ch] * h + beta[ch];
                }
            }
        }
        let op = BatchNormOp { normalized: Tensor::new(&shape, normalized), inv_std, gamma, batch_stats: p.train };
        g.custom_boxed(&[x, gv, bv], Tensor::new(&shape, out), Box::new(op))
    }
}

struct MaxPoolOp {
    argmax: Vec<u32>,
    input_len: usize,
    input_shape: Vec<usize>,
}

impl CustomOp for MaxPoolOp {
    fn name(&self) -> &'static str {
        "max_pool2d"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>> {
        let mut dx = vec![0.0f32; self.input_len];
        for (&i, &gv) in self.argmax.iter().zip(grad.data()) {
            dx[i as usize] += gv;
        }
        vec![Some(Tensor::new(&self.input_shape, dx))]
    }
}

/// Max pooling over `[N, C, H, W]` with a square window.
pub fn max_pool2d(g: &mut Graph, x: Var, kernel: usize, stride: usize, pad: usize) -> Var {
    let xt = g.value(x);
    let s = xt.shape().to_vec();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let oh = (h + 2 * pad - kernel) / stride + 1;
    let ow = (w + 2 * pad - kernel) / stride + 1;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_idx = 0usize;
                for ki in 0..kernel {
                    for kj in 0..kernel {
                        let (r, q) =
                            ((i * stride + ki) as isize - pad as isize, (j * stride + kj) as isize - pad as isize);
                        if r < 0 || q < 0 || r >= h as isize || q >= w as isize {
                            continue;
                        }
                        let idx = base + r as usize * w + q as usize;
                        if xt.data()[idx] > best {
                            best = xt.data()[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx as u32);
            }
        }
    }
    let op = MaxPoolOp { argmax, input_len: xt.len(), input_shape: s.clone() };
    g.custom_boxed(&[x], Tensor::new(&[n, c, oh, ow], out), Box::new(op))
}

/// `[N, C, ...] -> [N, C]`
pub fn global_avg_pool(g: &mut Graph, x: Var) -> Var {
    let s = g.shape(x).to_vec();
    let (n, c) = (s[0], s[1]);
    let inner: usize = s[2..].iter().product();
    let flat = g.reshape(x, &[n * c, inner]);
    let sums = g.sum_rows(flat);
    let means = g.scale(sums, 1.0 / inner as f32);
    g.reshape(means, &[n, c])
}

/// Row-wise softmax of `[N, C]` logits.
pub fn softmax(logits: &Tensor) -> Tensor {
    let c = logits.shape()[1];
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(c) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let exps: Vec<f64> = row.iter().map(|&v| math::exp64((v - max) as f64)).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| (e / total) as f32));
    }
    Tensor::new(logits.shape(), out)
}

struct CrossEntropyOp {
    probs: Tensor,
    labels: Vec<usize>,
}

impl CustomOp for CrossEntropyOp {
    fn name(&self) -> &'static str {
        "softmax_cross_entropy"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>> {
        let c = self.probs.shape()[1];
        let n = self.labels.len() as f32;
        let scale = grad.item() / n;
        let mut d = self.probs.data().to_vec();
        for (row, &label) in self.labels.iter().enumerate() {
            d[row * c + label] -= 1.0;
        }
        for v in &mut d {
            *v *= scale;
        }
        vec![Some(Tensor::new(self.probs.shape(), d))]
    }
}

/// Mean softmax cross-entropy of `[N, C]` logits against integer labels.
pub fn cross_entropy(g: &mut Graph, logits: Var, labels: &[usize]) -> Var {
    let probs = softmax(g.value(logits));
    let c = probs.shape()[1];
    assert_eq!(labels.len(), probs.shape()[0]);
    let loss: f64 = labels
        .iter()
        .enumerate()
        .map(|(row, &l)| -math::ln64(probs.data()[row * c + l].max(1e-30) as f64))
        .sum::<f64>()
        / labels.len() as f64;
    let op = CrossEntropyOp { probs, labels: labels.to_vec() };
    g.custom_boxed(&[logits], Tensor::scalar(loss as f32), Box::new(op))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    ids: Vec<ParamId>,
}

impl Adam {
    pub fn new(ps: &ParamSet, cfg: AdamConfig) -> Self {
        let ids = ps.trainable_ids();
        let m = ids.iter().map(|&id| Tensor::zeros(ps.tensor(id).shape())).collect::<Vec<_>>();
        Self { cfg, step: 0, v: m.clone(), m, ids }
    }

    /// Apply one update; `grads` must follow [`ParamSet::trainable_ids`] order.
    pub fn step(&mut self, ps: &mut ParamSet, grads: &[&Tensor]) {
        assert_eq!(grads.len(), self.ids.len());
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - libm::powf(c.beta1, self.step as f32);
        let bc2 = 1.0 - libm::powf(c.beta2, self.step as f32);
        for (k, &id) in self.ids.iter().enumerate() {
            let (m, v) = (self.m[k].data_mut(), self.v[k].data_mut());
            let p = ps.tensor_mut(id).data_mut();
            for (((pv, mv), vv), &gv) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(grads[k].data()) {
                *mv = c.beta1 * *mv + (1.0 - c.beta1) * gv;
                *vv = c.beta2 * *vv + (1.0 - c.beta2) * gv * gv;
                let mh = *mv / bc1;
                let vh = *vv / bc2;
                *pv -= c.lr * mh / (math::sqrt(vh) + c.eps);
            }
        }
    }
}

/// Parameter gradients from one backward pass, plus the buffer updates of that pass.
pub struct ParamGrads {
    pub grads: Vec<Tensor>,
    pub updates: Vec<(ParamId, Tensor)>,
}

impl ParamGrads {
    pub fn norm(&self) -> f32 {
        math::sqrt(self.grads.iter().map(|t| t.data().iter().map(|x| x * x).sum::<f32>()).sum())
    }
}

impl Bound<'_> {
    /// Differentiate `loss` with respect to every trainable parameter of this binding.
    pub fn backward(mut self, g: &mut Graph, loss: Var) -> ParamGrads {
        let vars: Vec<Var> = self.trainable_vars().iter().map(|(_, v)| *v).collect();
        let grads = g.grad(loss, &vars, false);
        ParamGrads { grads: grads.iter().map(|v| g.value(*v).clone()).collect(), updates: self.take_updates() }
    }
}

impl Adam {
    /// Commit buffer updates and take one optimizer step.
    pub fn apply(&mut self, ps: &mut ParamSet, grads: ParamGrads) {
        ps.apply_updates(grads.updates);
        let refs: Vec<&Tensor> = grads.grads.iter().collect();
        self.step(ps, &refs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_check(f: &dyn Fn(&Tensor) -> f64, x: &Tensor, analytic: &[f32], tol: f64) {
        let h = 1e-2f32;
        for i in 0..x.len() {
            let mut p = x.clone();
            p.data_mut()[i] += h;
            let mut m = x.clone();
            m.data_mut()[i] -= h;
            let num = (f(&p) - f(&m)) / (2.0 * h as f64);
            assert!((num - analytic[i] as f64).abs() < tol * (1.0 + num.abs()), "{i}: {num} vs {}", analytic[i]);
        }
    }

    #[test]
    fn batch_norm_gradient_in_train_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::new();
        let bn = BatchNorm::new(&mut ps, "bn", 2);
        let x0 = uniform(&[3, 2, 2, 2], 1.0, &mut rng);
        let weights = uniform(&[3, 2, 2, 2], 1.0, &mut rng);
        let f = |xv: &Tensor| {
            let mut g = Graph::new();
            let mut b = ps.bind(&mut g, true);
            let x = g.leaf(xv.clone());
            let y = bn.forward(&mut g, &mut b, x);
            let wv = g.leaf(weights.clone());
            let y = g.mul(y, wv);
            let s = g.square(y);
            let r = g.sum(s);
            g.value(r).item() as f64
        };
        let mut g = Graph::new();
        let mut b = ps.bind(&mut g, true);
        let x = g.leaf(x0.clone());
        let y = bn.forward(&mut g, &mut b, x);
        let wv = g.leaf(weights.clone());
        let y = g.mul(y, wv);
        let s = g.square(y);
        let r = g.sum(s);
        let gx = g.grad(r, &[x], false)[0];
        fd_check(&f, &x0, g.value(gx).data(), 3e-2);
        assert_eq!(b.take_updates().len(), 2);
    }

    #[test]
    fn cross_entropy_gradient() {
        let logits0 = Tensor::new(&[2, 3], alloc::vec![0.2, -0.5, 1.0, 0.3, 0.1, -0.2]);
        let labels = [2usize, 0];
        let f = |l: &Tensor| {
            let mut g = Graph::new();
            let x = g.leaf(l.clone());
            let r = cross_entropy(&mut g, x, &labels);
            g.value(r).item() as f64
        };
        let mut g = Graph::new();
        let x = g.leaf(logits0.clone());
        let r = cross_entropy(&mut g, x, &labels);
        let gx = g.grad(r, &[x], false)[0];
        fd_check(&f, &logits0, g.value(gx).data(), 1e-2);
    }

    #[test]
    fn max_pool_routes_gradient_to_argmax() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(&[1, 1, 2, 2], alloc::vec![1.0, 4.0, 2.0, 3.0]));
        let y = max_pool2d(&mut g, x, 2, 2, 0);
        assert_eq!(g.value(y).data(), &[4.0]);
        let s = g.sum(y);
        let gx = g.grad(s, &[x], false)[0];
        assert_eq!(g.value(gx).data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut ps = ParamSet::new();
        let id = ps.add("x", Tensor::new(&[2], alloc::vec![3.0, -2.0]), true);
        let mut opt = Adam::new(&ps, AdamConfig { lr: 0.1, ..AdamConfig::default() });
        for _ in 0..300 {
            let mut g = Graph::new();
            let b = ps.bind(&mut g, true);
            let x = b.var(id);
            let sq = g.square(x);
            let loss = g.sum(sq);
            let grads = b.backward(&mut g, loss);
            opt.apply(&mut ps, grads);
        }
        assert!(ps.tensor(id).data().iter().all(|v| v.abs() < 0.05));
    }
}
