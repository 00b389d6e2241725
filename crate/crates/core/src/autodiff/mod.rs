//! Reverse-mode automatic differentiation over small `f64` tensors.
//!
//! A [`Graph`] is a tape: every op appends a node holding its value, and
//! [`Graph::backward`] walks the tape in reverse. Parameters live in a
//! [`ParamStore`] and are copied onto the tape when bound, so a graph never
//! borrows the store.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
pub mod nn;

use std::collections::HashMap;

use crate::error::{Error, Result};
use kernels::ConvDims;
pub use nn::{ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    /// Stacks equal-length rows into `[rows, len]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Shape("rows differ in length".into()));
        }
        Ok(Tensor {
            shape: vec![rows.len(), len],
            data: rows.concat(),
        })
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    /// Splits the leading axis into rows.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.shape.first().copied().unwrap_or(1).max(1);
        self.data.chunks(self.data.len() / n).map(<[f64]>::to_vec).collect()
    }
}

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// How batch normalization picks its statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, running statistics updated.
    Train,
    /// Batch statistics, running statistics left alone.
    BatchStats,
    /// Running statistics.
    Eval,
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        dims: ConvDims,
    },
    ConvT1d {
        x: Var,
        w: Var,
        b: Var,
        dims: ConvDims,
    },
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Add(Var, Var),
    Scale(Var, f64),
    Reshape(Var),
    Crop {
        x: Var,
        start: usize,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
    BceWithLogits {
        x: Var,
        targets: Vec<f64>,
    },
    SoftmaxXent {
        x: Var,
        probs: Vec<f64>,
        labels: Vec<usize>,
    },
    External {
        x: Var,
        grad: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<(u64, ParamId), Var>,
    frozen: Vec<u64>,
}

/// Gradients from one backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    bound: HashMap<(u64, ParamId), Var>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn param(&self, store: &ParamStore, id: ParamId) -> Option<&[f64]> {
        self.bound.get(&(store.tag(), id)).and_then(|v| self.wrt(*v))
    }

    /// One entry per parameter of `store`, `None` where no gradient reached it.
    pub fn for_store(&self, store: &ParamStore) -> Vec<Option<Vec<f64>>> {
        (0..store.len())
            .map(|i| self.param(store, ParamId(i)).map(<[f64]>::to_vec))
            .collect()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parameters of `store` bound after this call are treated as constants.
    pub fn freeze(&mut self, store: &ParamStore) {
        self.frozen.push(store.tag());
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A constant input.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// An input whose gradient is wanted.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Binds a parameter; repeated binds of one parameter share a node, so
    /// gradients from every use accumulate.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let key = (store.tag(), id);
        if let Some(v) = self.bound.get(&key) {
            return *v;
        }
        let trainable = store.is_trainable(id) && !self.frozen.contains(&store.tag());
        let v = self.push(store.get(id).clone(), Op::Leaf, trainable);
        self.bound.insert(key, v);
        v
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] || self.shape(b) != [ws[0]] {
            return Err(Error::Shape(format!("conv1d input {xs:?} weight {ws:?}")));
        }
        let t_out = kernels::conv_out_len(xs[2], ws[2], stride, pad)
            .ok_or_else(|| Error::Shape(format!("conv1d kernel {} too long for {}", ws[2], xs[2])))?;
        let dims = ConvDims {
            n: xs[0],
            c_in: xs[1],
            c_out: ws[0],
            k: ws[2],
            t_in: xs[2],
            t_out,
            stride,
            pad,
        };
        let mut y = vec![0.0; dims.n * dims.c_out * t_out];
        kernels::conv1d(
            &self.value(x).data,
            &self.value(w).data,
            &self.value(b).data,
            &dims,
            &mut y,
        );
        let needs = self.needs(&[x, w, b]);
        Ok(self.push(
            Tensor {
                shape: vec![dims.n, dims.c_out, t_out],
                data: y,
            },
            Op::Conv1d { x, w, b, dims },
            needs,
        ))
    }

    pub fn conv_transpose1d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[0] || self.shape(b) != [ws[1]] {
            return Err(Error::Shape(format!("conv_transpose1d input {xs:?} weight {ws:?}")));
        }
        let t_out = kernels::conv_transpose_out_len(xs[2], ws[2], stride, pad)
            .ok_or_else(|| Error::Shape("conv_transpose1d output would be empty".into()))?;
        let dims = ConvDims {
            n: xs[0],
            c_in: xs[1],
            c_out: ws[1],
            k: ws[2],
            t_in: xs[2],
            t_out,
            stride,
            pad,
        };
        let mut y = vec![0.0; dims.n * dims.c_out * t_out];
        kernels::conv_transpose1d(
            &self.value(x).data,
            &self.value(w).data,
            &self.value(b).data,
            &dims,
            &mut y,
        );
        let needs = self.needs(&[x, w, b]);
        Ok(self.push(
            Tensor {
                shape: vec![dims.n, dims.c_out, t_out],
                data: y,
            },
            Op::ConvT1d { x, w, b, dims },
            needs,
        ))
    }

    /// Dense layer on `[N, in]` with weight `[out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || self.shape(b) != [ws[0]] {
            return Err(Error::Shape(format!("linear input {xs:?} weight {ws:?}")));
        }
        let (n, n_in, n_out) = (xs[0], xs[1], ws[0]);
        let mut y = vec![0.0; n * n_out];
        kernels::linear(
            &self.value(x).data,
            &self.value(w).data,
            &self.value(b).data,
            n,
            n_in,
            n_out,
            &mut y,
        );
        let needs = self.needs(&[x, w, b]);
        Ok(self.push(
            Tensor {
                shape: vec![n, n_out],
                data: y,
            },
            Op::Linear { x, w, b },
            needs,
        ))
    }

    /// Per-channel batch normalization of `[N, C]` or `[N, C, T]`.
    /// `running_mean` / `running_var` are read in eval mode and updated in
    /// train mode (the variance with the unbiased estimate).
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: Mode,
        running_mean: &mut [f64],
        running_var: &mut [f64],
    ) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if !(xs.len() == 2 || xs.len() == 3) {
            return Err(Error::Shape(format!("batch_norm input {xs:?}")));
        }
        let (n, c) = (xs[0], xs[1]);
        let t = if xs.len() == 3 { xs[2] } else { 1 };
        if self.shape(gamma) != [c] || self.shape(beta) != [c] || running_mean.len() != c || running_var.len() != c {
            return Err(Error::Shape(format!("batch_norm parameters for {c} channels")));
        }
        let batch_stats = mode != Mode::Eval;
        if batch_stats && n < 2 {
            return Err(Error::InvalidArgument(
                "batch normalization needs a batch of at least 2 in training".into(),
            ));
        }
        let xv = &self.nodes[x.0].value.data;
        let (g, bt) = (&self.nodes[gamma.0].value.data, &self.nodes[beta.0].value.data);
        let m = (n * t) as f64;
        let mut xhat = vec![0.0; xv.len()];
        let mut y = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let idx = |i: usize, j: usize| (i * c + ch) * t + j;
            let (mean, var) = if batch_stats {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..t {
                        s += xv[idx(i, j)];
                    }
                }
                let mean = s / m;
                let mut v = 0.0;
                for i in 0..n {
                    for j in 0..t {
                        let d = xv[idx(i, j)] - mean;
                        v += d * d;
                    }
                }
                let var = v / m;
                if mode == Mode::Train {
                    running_mean[ch] = (1.0 - BN_MOMENTUM) * running_mean[ch] + BN_MOMENTUM * mean;
                    let unbiased = v / (m - 1.0);
                    running_var[ch] = (1.0 - BN_MOMENTUM) * running_var[ch] + BN_MOMENTUM * unbiased;
                }
                (mean, var)
            } else {
                (running_mean[ch], running_var[ch])
            };
            let is = 1.0 / (var + BN_EPS).sqrt();
            inv_std[ch] = is;
            for i in 0..n {
                for j in 0..t {
                    let k = idx(i, j);
                    xhat[k] = (xv[k] - mean) * is;
                    y[k] = g[ch] * xhat[k] + bt[ch];
                }
            }
        }
        let needs = self.needs(&[x, gamma, beta]);
        Ok(self.push(
            Tensor { shape: xs, data: y },
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            needs,
        ))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = &self.nodes[x.0].value;
        let t = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&a| f(a)).collect(),
        };
        let needs = self.needs(&[x]);
        self.push(t, op, needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |a| a.max(0.0), Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, |a| if a > 0.0 { a } else { slope * a }, Op::LeakyRelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |a| a * c, Op::Scale(x, c))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        let k = *v
            .shape
            .last()
            .ok_or_else(|| Error::Shape("softmax of a scalar".into()))?;
        let mut out = v.data.clone();
        for row in out.chunks_mut(k) {
            softmax_in_place(row);
        }
        let t = Tensor {
            shape: v.shape.clone(),
            data: out,
        };
        let needs = self.needs(&[x]);
        Ok(self.push(t, Op::Softmax(x), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("add {:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let data = self
            .value(a)
            .data
            .iter()
            .zip(&self.value(b).data)
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor {
            shape: self.shape(a).to_vec(),
            data,
        };
        let needs = self.needs(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), needs))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = Tensor::new(shape.to_vec(), self.value(x).data.clone())?;
        let needs = self.needs(&[x]);
        Ok(self.push(t, Op::Reshape(x), needs))
    }

    /// Keeps `len` positions of the last axis starting at `start`.
    pub fn crop(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let t_in = *xs.last().ok_or_else(|| Error::Shape("crop of a scalar".into()))?;
        if start + len > t_in {
            return Err(Error::Shape(format!("crop {start}+{len} beyond {t_in}")));
        }
        let data = self
            .value(x)
            .data
            .chunks(t_in)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let mut shape = xs;
        *shape.last_mut().unwrap() = len;
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor { shape, data }, Op::Crop { x, start }, needs))
    }

    /// Max pooling over the last axis; trailing positions that do not fill a
    /// window are dropped.
    pub fn max_pool1d(&mut self, x: Var, size: usize, stride: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let t_in = *xs.last().ok_or_else(|| Error::Shape("pool of a scalar".into()))?;
        let t_out = kernels::conv_out_len(t_in, size, stride, 0)
            .ok_or_else(|| Error::Shape(format!("pool window {size} longer than {t_in}")))?;
        let src = &self.value(x).data;
        let rows = src.len() / t_in;
        let mut data = Vec::with_capacity(rows * t_out);
        let mut argmax = Vec::with_capacity(rows * t_out);
        for r in 0..rows {
            let row = &src[r * t_in..][..t_in];
            for o in 0..t_out {
                let mut best = o * stride;
                for i in o * stride + 1..o * stride + size {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                data.push(row[best]);
                argmax.push(r * t_in + best);
            }
        }
        let mut shape = xs;
        *shape.last_mut().unwrap() = t_out;
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor { shape, data }, Op::MaxPool { x, argmax }, needs))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        let needs = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), needs)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data.iter().sum::<f64>() / v.numel() as f64;
        let needs = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Mean(x), needs)
    }

    /// Mean binary cross-entropy of sigmoid(logits) against `targets`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let v = self.value(logits);
        if v.numel() != targets.len() || targets.is_empty() {
            return Err(Error::Shape(format!(
                "{} logits vs {} targets",
                v.numel(),
                targets.len()
            )));
        }
        let loss = v
            .data
            .iter()
            .zip(targets)
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / targets.len() as f64;
        let needs = self.needs(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits {
                x: logits,
                targets: targets.to_vec(),
            },
            needs,
        ))
    }

    /// Mean categorical cross-entropy of softmax(logits) on `[N, K]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let v = self.value(logits);
        if v.shape.len() != 2 || v.shape[0] != labels.len() || labels.is_empty() {
            return Err(Error::Shape(format!("logits {:?} vs {} labels", v.shape, labels.len())));
        }
        let k = v.shape[1];
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let mut probs = v.data.clone();
        let mut loss = 0.0;
        for (row, &l) in probs.chunks_mut(k).zip(labels) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            loss += lse - row[l];
            softmax_in_place(row);
        }
        loss /= labels.len() as f64;
        let needs = self.needs(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                x: logits,
                probs,
                labels: labels.to_vec(),
            },
            needs,
        ))
    }

    /// A scalar loss computed outside the graph, with its gradient with
    /// respect to `x` supplied by the caller.
    pub fn external_loss(&mut self, x: Var, value: f64, grad: Vec<f64>) -> Result<Var> {
        if grad.len() != self.value(x).numel() {
            return Err(Error::Shape(format!(
                "external gradient of {} for {} values",
                grad.len(),
                self.value(x).numel()
            )));
        }
        let needs = self.needs(&[x]);
        Ok(self.push(Tensor::scalar(value), Op::External { x, grad }, needs))
    }

    /// Gradients of the scalar `loss` with respect to every node that needs one.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Shape(format!("backward from non-scalar {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.propagate(&node.op, &node.value, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Gradients {
            grads,
            bound: self.bound.clone(),
        })
    }

    fn acc<'a>(&self, grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let n = self.nodes[v.0].value.numel();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn propagate(&self, op: &Op, out: &Tensor, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value.data;
        match op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, dims } | Op::ConvT1d { x, w, b, dims } => {
                let transpose = matches!(op, Op::ConvT1d { .. });
                let mut dx = self.acc(grads, *x).map(std::mem::take);
                let mut dw = self.acc(grads, *w).map(std::mem::take);
                let mut db = self.acc(grads, *b).map(std::mem::take);
                let f = if transpose {
                    kernels::conv_transpose1d_backward
                } else {
                    kernels::conv1d_backward
                };
                f(
                    val(*x),
                    val(*w),
                    dy,
                    dims,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                for (v, g) in [(*x, dx), (*w, dw), (*b, db)] {
                    if let Some(g) = g {
                        grads[v.0] = Some(g);
                    }
                }
            }
            Op::Linear { x, w, b } => {
                let xs = &self.nodes[x.0].value.shape;
                let (n, n_in, n_out) = (xs[0], xs[1], out.shape[1]);
                let mut dx = self.acc(grads, *x).map(std::mem::take);
                let mut dw = self.acc(grads, *w).map(std::mem::take);
                let mut db = self.acc(grads, *b).map(std::mem::take);
                kernels::linear_backward(
                    val(*x),
                    val(*w),
                    dy,
                    n,
                    n_in,
                    n_out,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                for (v, g) in [(*x, dx), (*w, dw), (*b, db)] {
                    if let Some(g) = g {
                        grads[v.0] = Some(g);
                    }
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let s = &out.shape;
                let (n, c) = (s[0], s[1]);
                let t = if s.len() == 3 { s[2] } else { 1 };
                let m = (n * t) as f64;
                let g = val(*gamma).clone();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                let mut dx = vec![0.0; dy.len()];
                for ch in 0..c {
                    let idx = |i: usize, j: usize| (i * c + ch) * t + j;
                    let (mut sum_dxhat, mut sum_dxhat_xhat) = (0.0, 0.0);
                    for i in 0..n {
                        for j in 0..t {
                            let k = idx(i, j);
                            dgamma[ch] += dy[k] * xhat[k];
                            dbeta[ch] += dy[k];
                            let dxh = dy[k] * g[ch];
                            sum_dxhat += dxh;
                            sum_dxhat_xhat += dxh * xhat[k];
                        }
                    }
                    for i in 0..n {
                        for j in 0..t {
                            let k = idx(i, j);
                            let dxh = dy[k] * g[ch];
                            dx[k] = if *batch_stats {
                                inv_std[ch] / m * (m * dxh - sum_dxhat - xhat[k] * sum_dxhat_xhat)
                            } else {
                                dxh * inv_std[ch]
                            };
                        }
                    }
                }
                for (v, d) in [(*x, dx), (*gamma, dgamma), (*beta, dbeta)] {
                    if let Some(acc) = self.acc(grads, v) {
                        add_into(acc, &d);
                    }
                }
            }
            Op::Relu(x) => {
                let xv = val(*x);
                if let Some(acc) = self.acc(grads, *x) {
                    for ((a, &d), &xi) in acc.iter_mut().zip(dy).zip(xv) {
                        if xi > 0.0 {
                            *a += d;
                        }
                    }
                }
            }
            Op::LeakyRelu(x, slope) => {
                let xv = val(*x);
                if let Some(acc) = self.acc(grads, *x) {
                    for ((a, &d), &xi) in acc.iter_mut().zip(dy).zip(xv) {
                        *a += if xi > 0.0 { d } else { slope * d };
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(acc) = self.acc(grads, *x) {
                    for ((a, &d), &s) in acc.iter_mut().zip(dy).zip(&out.data) {
                        *a += d * s * (1.0 - s);
                    }
                }
            }
            Op::Tanh(x) => {
                if let Some(acc) = self.acc(grads, *x) {
                    for ((a, &d), &th) in acc.iter_mut().zip(dy).zip(&out.data) {
                        *a += d * (1.0 - th * th);
                    }
                }
            }
            Op::Softmax(x) => {
                let k = *out.shape.last().unwrap();
                if let Some(acc) = self.acc(grads, *x) {
                    for ((a, d), p) in acc.chunks_mut(k).zip(dy.chunks(k)).zip(out.data.chunks(k)) {
                        let dot: f64 = d.iter().zip(p).map(|(u, v)| u * v).sum();
                        for i in 0..k {
                            a[i] += p[i] * (d[i] - dot);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(acc) = self.acc(grads, v) {
                        add_into(acc, dy);
                    }
                }
            }
            Op::Scale(x, c) => {
                if let Some(acc) = self.acc(grads, *x) {
                    for (a, d) in acc.iter_mut().zip(dy) {
                        *a += c * d;
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(acc) = self.acc(grads, *x) {
                    add_into(acc, dy);
                }
            }
            Op::Crop { x, start } => {
                let t_in = *self.nodes[x.0].value.shape.last().unwrap();
                let len = *out.shape.last().unwrap();
                if let Some(acc) = self.acc(grads, *x) {
                    for (arow, drow) in acc.chunks_mut(t_in).zip(dy.chunks(len)) {
                        add_into(&mut arow[*start..start + len], drow);
                    }
                }
            }
            Op::MaxPool { x, argmax } => {
                if let Some(acc) = self.acc(grads, *x) {
                    for (&i, d) in argmax.iter().zip(dy) {
                        acc[i] += d;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(acc) = self.acc(grads, *x) {
                    acc.iter_mut().for_each(|a| *a += dy[0]);
                }
            }
            Op::Mean(x) => {
                if let Some(acc) = self.acc(grads, *x) {
                    let k = dy[0] / acc.len() as f64;
                    acc.iter_mut().for_each(|a| *a += k);
                }
            }
            Op::BceWithLogits { x, targets } => {
                let xv = val(*x);
                if let Some(acc) = self.acc(grads, *x) {
                    let k = dy[0] / targets.len() as f64;
                    for ((a, &xi), &y) in acc.iter_mut().zip(xv).zip(targets) {
                        *a += k * (sigmoid(xi) - y);
                    }
                }
            }
            Op::SoftmaxXent { x, probs, labels } => {
                if let Some(acc) = self.acc(grads, *x) {
                    let k = acc.len() / labels.len();
                    let s = dy[0] / labels.len() as f64;
                    for (r, &l) in labels.iter().enumerate() {
                        for j in 0..k {
                            let target = if j == l { 1.0 } else { 0.0 };
                            acc[r * k + j] += s * (probs[r * k + j] - target);
                        }
                    }
                }
            }
            Op::External { x, grad } => {
                if let Some(acc) = self.acc(grads, *x) {
                    for (a, g) in acc.iter_mut().zip(grad) {
                        *a += dy[0] * g;
                    }
                }
            }
        }
    }
}

fn add_into(acc: &mut [f64], d: &[f64]) {
    for (a, b) in acc.iter_mut().zip(d) {
        *a += b;
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}
