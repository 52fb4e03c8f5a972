//! Reverse-mode tape.
//!
//! Every operation appends a node holding its forward value and whatever it
//! needs for the backward pass. Node ids are handed out in creation order, so
//! the node list is already a topological order and `backward` is a single
//! reverse sweep.

use super::kernels::{self, ConvGeometry};
use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding of (K-1)/2 on each side; output keeps the input size.
    Same,
    /// No padding; output shrinks by K-1.
    Valid,
}

enum Op {
    Leaf,
    Conv2d { input: Var, kernel: Var, bias: Var, geom: ConvGeometry, cols: Vec<f64> },
    MaxPool { input: Var, argmax: Vec<usize> },
    Relu { input: Var },
    Dense { input: Var, weights: Var, bias: Var, batch: usize },
    Mse { a: Var, b: Var },
    Gram { input: Var, positions: usize, channels: usize },
    WeightedSum { terms: Vec<(Var, f64)> },
    MulConst { input: Var, factor: Tensor },
    Reshape { input: Var },
    ConcatChannels { a: Var, b: Var, ca: usize, cb: usize },
    SoftmaxCrossEntropy { logits: Var, probs: Vec<f64>, targets: Vec<usize> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a computation for reverse-mode differentiation.
///
/// A tape is single-owner; independent tapes can run on different threads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; zero when `var` did not
    /// contribute to the loss or does not require gradients.
    pub fn wrt(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }

    /// Moves the gradient out, leaving zero behind.
    pub fn take(&mut self, var: Var) -> Tensor {
        self.grads[var.0].take().unwrap_or_else(|| Tensor::zeros(&self.shapes[var.0]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a tensor that gradients are requested for.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Registers a tensor that is treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// 2-D convolution over an H×W×Cin (or N×H×W×Cin) input with a
    /// Kh×Kw×Cin×Cout kernel and a Cout bias. Kernel sizes must be odd.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, padding: Padding) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let ks = self.value(kernel).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        let (batch, h, w, c, batched) = match xs.as_slice() {
            [h, w, c] => (1, *h, *w, *c, false),
            [n, h, w, c] => (*n, *h, *w, *c, true),
            _ => return shape_err(format!("conv2d input must be H×W×C or N×H×W×C, got {xs:?}")),
        };
        let [kh, kw, kc, co] = ks.as_slice() else {
            return shape_err(format!("conv2d kernel must be Kh×Kw×Cin×Cout, got {ks:?}"));
        };
        let (kh, kw, kc, co) = (*kh, *kw, *kc, *co);
        if kh % 2 == 0 || kw % 2 == 0 {
            return shape_err(format!("conv2d kernel sizes must be odd, got {kh}×{kw}"));
        }
        if kc != c {
            return shape_err(format!("conv2d kernel expects {kc} input channels, input has {c}"));
        }
        if bs != [co] {
            return shape_err(format!("conv2d bias must have shape [{co}], got {bs:?}"));
        }
        let (pad, out_h, out_w) = match padding {
            Padding::Same => ((kh - 1) / 2, h, w),
            Padding::Valid => {
                if kh > h || kw > w {
                    return shape_err(format!("conv2d kernel {kh}×{kw} larger than input {h}×{w} with valid padding"));
                }
                (0, h - kh + 1, w - kw + 1)
            }
        };
        if padding == Padding::Same && kh != kw {
            return shape_err("same padding requires a square kernel");
        }
        let geom = ConvGeometry { batch, in_h: h, in_w: w, in_c: c, k_h: kh, k_w: kw, out_c: co, pad, out_h, out_w };
        let cols = kernels::im2col(self.value(input).data(), &geom);
        let p = geom.positions();
        let klen = geom.patch_len();
        let mut out = vec![0.0; p * co];
        kernels::gemm(p, klen, co, &cols, klen as isize, 1, self.value(kernel).data(), co as isize, 1, &mut out, false);
        let b = self.value(bias).data();
        for row in out.chunks_exact_mut(co) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let shape = if batched { vec![batch, out_h, out_w, co] } else { vec![out_h, out_w, co] };
        let rg = self.any_grad(&[input, kernel, bias]);
        // im2col rows are only needed to form the kernel gradient.
        let cols = if self.nodes[kernel.0].requires_grad { cols } else { Vec::new() };
        Ok(self.push(Tensor::new(shape, out)?, Op::Conv2d { input, kernel, bias, geom, cols }, rg))
    }

    /// 2×2, stride-2 max pooling (H×W×C or N×H×W×C).
    pub fn max_pool2d(&mut self, input: Var) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let (batch, h, w, c, batched) = match xs.as_slice() {
            [h, w, c] => (1, *h, *w, *c, false),
            [n, h, w, c] => (*n, *h, *w, *c, true),
            _ => return shape_err(format!("max_pool2d input must be H×W×C or N×H×W×C, got {xs:?}")),
        };
        let (out, argmax, oh, ow) = kernels::max_pool_2x2(self.value(input).data(), batch, h, w, c);
        let shape = if batched { vec![batch, oh, ow, c] } else { vec![oh, ow, c] };
        let rg = self.any_grad(&[input]);
        Ok(self.push(Tensor::new(shape, out)?, Op::MaxPool { input, argmax }, rg))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        let rg = self.any_grad(&[input]);
        self.push(value, Op::Relu { input }, rg)
    }

    /// Affine map `input · weights + bias` for an N vector or a B×N batch.
    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let ws = self.value(weights).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        let (batch, n, batched) = match xs.as_slice() {
            [n] => (1, *n, false),
            [b, n] => (*b, *n, true),
            _ => return shape_err(format!("dense input must be N or B×N, got {xs:?}")),
        };
        let [wn, m] = ws.as_slice() else {
            return shape_err(format!("dense weights must be N×M, got {ws:?}"));
        };
        if *wn != n {
            return shape_err(format!("dense weights expect {wn} inputs, got {n}"));
        }
        let m = *m;
        if bs != [m] {
            return shape_err(format!("dense bias must have shape [{m}], got {bs:?}"));
        }
        let mut out = vec![0.0; batch * m];
        kernels::gemm(batch, n, m, self.value(input).data(), n as isize, 1, self.value(weights).data(), m as isize, 1, &mut out, false);
        let b = self.value(bias).data();
        for row in out.chunks_exact_mut(m) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let shape = if batched { vec![batch, m] } else { vec![m] };
        let rg = self.any_grad(&[input, weights, bias]);
        Ok(self.push(Tensor::new(shape, out)?, Op::Dense { input, weights, bias, batch }, rg))
    }

    /// Mean of squared elementwise differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return shape_err(format!("mse operands differ in shape: {:?} vs {:?}", ta.shape(), tb.shape()));
        }
        let n = ta.len() as f64;
        let s: f64 = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::scalar(s / n), Op::Mse { a, b }, rg))
    }

    /// Channel Gram matrix `FᵀF / (H·W)` of an H×W×C (or 1×H×W×C) activation.
    pub fn gram(&mut self, input: Var) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let (positions, channels) = match xs.as_slice() {
            [h, w, c] | [1, h, w, c] => (h * w, *c),
            _ => return shape_err(format!("gram expects an H×W×C activation, got {xs:?}")),
        };
        let g = kernels::gram(self.value(input).data(), positions, channels);
        let rg = self.any_grad(&[input]);
        Ok(self.push(Tensor::new(vec![channels, channels], g)?, Op::Gram { input, positions, channels }, rg))
    }

    /// `Σ wᵢ·xᵢ` over same-shaped operands.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let Some(&(first, _)) = terms.first() else {
            return Err(Error::InvalidArgument("weighted_sum needs at least one term".into()));
        };
        let shape = self.value(first).shape().to_vec();
        let mut out = vec![0.0; self.value(first).len()];
        for &(v, w) in terms {
            let t = self.value(v);
            if t.shape() != shape.as_slice() {
                return shape_err(format!("weighted_sum operands differ in shape: {shape:?} vs {:?}", t.shape()));
            }
            for (o, x) in out.iter_mut().zip(t.data()) {
                *o += w * x;
            }
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.0).collect();
        let rg = self.any_grad(&vars);
        Ok(self.push(Tensor::new(shape, out)?, Op::WeightedSum { terms: terms.to_vec() }, rg))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        self.weighted_sum(&[(input, factor)]).expect("single term")
    }

    /// Elementwise product with a constant tensor (dropout masks).
    pub fn mul_const(&mut self, input: Var, factor: Tensor) -> Result<Var> {
        let x = self.value(input);
        if x.shape() != factor.shape() {
            return shape_err(format!("mul_const shape mismatch: {:?} vs {:?}", x.shape(), factor.shape()));
        }
        let data = x.data().iter().zip(factor.data()).map(|(a, b)| a * b).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, Op::MulConst { input, factor }, rg))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, Op::Reshape { input }, rg))
    }

    /// Concatenates two tensors along their last (channel) axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape().to_vec(), self.value(b).shape().to_vec());
        if sa.len() != sb.len() || sa.is_empty() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return shape_err(format!("concat_channels needs matching leading dims: {sa:?} vs {sb:?}"));
        }
        let ca = *sa.last().unwrap();
        let cb = *sb.last().unwrap();
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(da.len() + db.len());
        for (ra, rb) in da.chunks_exact(ca).zip(db.chunks_exact(cb)) {
            out.extend_from_slice(ra);
            out.extend_from_slice(rb);
        }
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = ca + cb;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, Op::ConcatChannels { a, b, ca, cb }, rg))
    }

    /// Mean softmax cross-entropy of B×K logits against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let xs = self.value(logits).shape().to_vec();
        let (batch, k) = match xs.as_slice() {
            [k] => (1, *k),
            [b, k] => (*b, *k),
            _ => return shape_err(format!("logits must be K or B×K, got {xs:?}")),
        };
        if targets.len() != batch {
            return shape_err(format!("{} targets for a batch of {batch}", targets.len()));
        }
        if let Some(t) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::InvalidArgument(format!("target class {t} out of range for {k} classes")));
        }
        let probs = softmax_rows(self.value(logits).data(), k);
        let loss: f64 = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| -probs[i * k + t].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / batch as f64;
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy { logits, probs, targets: targets.to_vec() },
            rg,
        ))
    }

    /// Back-propagates from a scalar `loss` through the whole tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return shape_err(format!("backward needs a scalar loss, got shape {:?}", lv.shape()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.requires_grad {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn wants(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, bias, geom, cols, .. } => {
                let p = geom.positions();
                let klen = geom.patch_len();
                let co = geom.out_c;
                if self.wants(*input) {
                    let mut dcols = vec![0.0; p * klen];
                    let kd = self.value(*kernel).data();
                    // dcols = dout · Kᵀ, Kᵀ viewed through strides.
                    kernels::gemm(p, co, klen, gd, co as isize, 1, kd, 1, co as isize, &mut dcols, false);
                    let dx = kernels::col2im(&dcols, geom);
                    let shape = self.value(*input).shape().to_vec();
                    self.accumulate(grads, *input, Tensor::new(shape, dx).expect("input shape"));
                }
                if self.wants(*kernel) {
                    let mut dk = vec![0.0; klen * co];
                    kernels::gemm(klen, p, co, cols, 1, klen as isize, gd, co as isize, 1, &mut dk, false);
                    let shape = self.value(*kernel).shape().to_vec();
                    self.accumulate(grads, *kernel, Tensor::new(shape, dk).expect("kernel shape"));
                }
                if self.wants(*bias) {
                    let mut db = vec![0.0; co];
                    for row in gd.chunks_exact(co) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *bias, Tensor::from_vec(db));
                }
            }
            Op::MaxPool { input, argmax } => {
                let x = self.value(*input);
                let mut dx = vec![0.0; x.len()];
                for (&src, &gv) in argmax.iter().zip(gd) {
                    dx[src] += gv;
                }
                self.accumulate(grads, *input, Tensor::new(x.shape().to_vec(), dx).expect("pool shape"));
            }
            Op::Relu { input } => {
                let x = self.value(*input);
                let dx = x.data().iter().zip(gd).map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 }).collect();
                self.accumulate(grads, *input, Tensor::new(x.shape().to_vec(), dx).expect("relu shape"));
            }
            Op::Dense { input, weights, bias, batch } => {
                let x = self.value(*input);
                let w = self.value(*weights);
                let (n, m) = (w.shape()[0], w.shape()[1]);
                if self.wants(*input) {
                    let mut dx = vec![0.0; batch * n];
                    kernels::gemm(*batch, m, n, gd, m as isize, 1, w.data(), 1, m as isize, &mut dx, false);
                    self.accumulate(grads, *input, Tensor::new(x.shape().to_vec(), dx).expect("dense input"));
                }
                if self.wants(*weights) {
                    let mut dw = vec![0.0; n * m];
                    kernels::gemm(n, *batch, m, x.data(), 1, n as isize, gd, m as isize, 1, &mut dw, false);
                    self.accumulate(grads, *weights, Tensor::new(vec![n, m], dw).expect("dense weights"));
                }
                if self.wants(*bias) {
                    let mut db = vec![0.0; m];
                    for row in gd.chunks_exact(m) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *bias, Tensor::from_vec(db));
                }
            }
            Op::Mse { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let scale = 2.0 * gd[0] / ta.len() as f64;
                let diff: Vec<f64> = ta.data().iter().zip(tb.data()).map(|(x, y)| scale * (x - y)).collect();
                if self.wants(*b) {
                    let neg = diff.iter().map(|d| -d).collect();
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), neg).expect("mse shape"));
                }
                if self.wants(*a) {
                    self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), diff).expect("mse shape"));
                }
            }
            Op::Gram { input, positions, channels } => {
                let c = *channels;
                let mut sym = vec![0.0; c * c];
                let norm = *positions as f64;
                for i in 0..c {
                    for j in 0..c {
                        sym[i * c + j] = (gd[i * c + j] + gd[j * c + i]) / norm;
                    }
                }
                let x = self.value(*input);
                let mut dx = vec![0.0; x.len()];
                kernels::gemm(*positions, c, c, x.data(), c as isize, 1, &sym, c as isize, 1, &mut dx, false);
                self.accumulate(grads, *input, Tensor::new(x.shape().to_vec(), dx).expect("gram shape"));
            }
            Op::WeightedSum { terms } => {
                for &(v, w) in terms {
                    if self.wants(v) {
                        let d = gd.iter().map(|x| w * x).collect();
                        self.accumulate(grads, v, Tensor::new(g.shape().to_vec(), d).expect("sum shape"));
                    }
                }
            }
            Op::MulConst { input, factor } => {
                let d = gd.iter().zip(factor.data()).map(|(a, b)| a * b).collect();
                self.accumulate(grads, *input, Tensor::new(g.shape().to_vec(), d).expect("mul shape"));
            }
            Op::Reshape { input } => {
                let shape = self.value(*input).shape().to_vec();
                self.accumulate(grads, *input, g.clone().reshape(&shape).expect("reshape back"));
            }
            Op::ConcatChannels { a, b, ca, cb } => {
                let w = ca + cb;
                let rows = gd.len() / w;
                let mut da = Vec::with_capacity(rows * ca);
                let mut db = Vec::with_capacity(rows * cb);
                for row in gd.chunks_exact(w) {
                    da.extend_from_slice(&row[..*ca]);
                    db.extend_from_slice(&row[*ca..]);
                }
                if self.wants(*a) {
                    let s = self.value(*a).shape().to_vec();
                    self.accumulate(grads, *a, Tensor::new(s, da).expect("concat a"));
                }
                if self.wants(*b) {
                    let s = self.value(*b).shape().to_vec();
                    self.accumulate(grads, *b, Tensor::new(s, db).expect("concat b"));
                }
            }
            Op::SoftmaxCrossEntropy { logits, probs, targets } => {
                let batch = targets.len();
                let k = probs.len() / batch;
                let scale = gd[0] / batch as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (i, &t) in targets.iter().enumerate() {
                    d[i * k + t] -= scale;
                }
                let s = self.value(*logits).shape().to_vec();
                self.accumulate(grads, *logits, Tensor::new(s, d).expect("logit shape"));
            }
        }
    }
}

/// Numerically stable row-wise softmax over rows of length `k`.
pub fn softmax_rows(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / z));
    }
    out
}
