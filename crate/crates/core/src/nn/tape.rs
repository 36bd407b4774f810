//! Reverse-mode differentiation over a linear tape of dense ops.

use super::tensor::{gemm, Tensor};
use super::ParamSet;
use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf { param: Option<usize> },
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    LeakyRelu(Var),
    Sigmoid(Var),
    MeanMax { input: Var, argmax: Vec<usize> },
    Concat(Vec<Var>),
    Row(Var, usize),
    SliceCols(Var, usize, usize),
    Mse(Var, Tensor),
    SignLoss(Var, Tensor),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", a.shape, b.shape))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf { param: None })
    }

    pub fn param(&mut self, params: &ParamSet, index: usize) -> Var {
        self.push(params.params[index].value.clone(), Op::Leaf { param: Some(index) })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let mut out = Tensor::zeros(ta.rows(), tb.cols());
        gemm(ta, false, tb, false, &mut out, false);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// Adds a `1 x d` bias to every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(shape_err("add_bias", ta, tb));
        }
        let d = ta.cols();
        let mut out = ta.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v += tb.data[i % d];
        }
        Ok(self.push(out, Op::AddRowBias(a, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(shape_err("add", ta, tb));
        }
        let mut out = ta.clone();
        out.add_assign(tb);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn leaky_relu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v *= LEAKY_SLOPE
            }
        });
        self.push(out, Op::LeakyRelu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
        self.push(out, Op::Sigmoid(a))
    }

    /// Column-wise mean and max over rows, concatenated into `1 x 2d`.
    pub fn mean_max(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (n, d) = (t.rows(), t.cols());
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut out = vec![0.0; 2 * d];
        let mut argmax = vec![0usize; d];
        for c in 0..d {
            let mut best = t.get(0, c);
            let mut sum = 0.0;
            for r in 0..n {
                let v = t.get(r, c);
                sum += v;
                if v > best {
                    best = v;
                    argmax[c] = r;
                }
            }
            out[c] = sum / n as f64;
            out[d + c] = best;
        }
        Ok(self.push(Tensor::row(out), Op::MeanMax { input: a, argmax }))
    }

    /// Concatenates tensors with equal row counts along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        if let Some(bad) = parts.iter().find(|v| self.value(**v).rows() != rows) {
            return Err(shape_err("concat", self.value(parts[0]), self.value(*bad)));
        }
        let cols: usize = parts.iter().map(|v| self.value(*v).cols()).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for v in parts {
                out.extend_from_slice(self.value(*v).row_slice(r));
            }
        }
        Ok(self.push(Tensor::from_vec(rows, cols, out), Op::Concat(parts.to_vec())))
    }

    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let t = self.value(a);
        if index >= t.rows() {
            return Err(Error::BadQueryIndex { index, size: t.rows() });
        }
        let out = Tensor::row(t.row_slice(index).to_vec());
        Ok(self.push(out, Op::Row(a, index)))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let t = self.value(a);
        let mut out = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            out.extend_from_slice(&t.row_slice(r)[start..end]);
        }
        let rows = t.rows();
        self.push(Tensor::from_vec(rows, end - start, out), Op::SliceCols(a, start, end))
    }

    pub fn mse(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        let p = self.value(pred);
        if p.shape != target.shape {
            return Err(shape_err("mse", p, &target));
        }
        let n = p.len() as f64;
        let loss = p.data.iter().zip(&target.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        Ok(self.push(Tensor::scalar(loss), Op::Mse(pred, target)))
    }

    /// Mean hinge on sign disagreement; zero targets contribute nothing.
    pub fn sign_loss(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        let p = self.value(pred);
        if p.shape != target.shape {
            return Err(shape_err("sign_loss", p, &target));
        }
        let n = p.len() as f64;
        let loss = p
            .data
            .iter()
            .zip(&target.data)
            .map(|(a, t)| (-a * sign(*t)).max(0.0))
            .sum::<f64>()
            / n;
        Ok(self.push(Tensor::scalar(loss), Op::SignLoss(pred, target)))
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Back-propagates from a `1 x 1` output.
    pub fn backward(&mut self, out: Var) {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut seed = Tensor::zeros(1, 1);
        seed.data[0] = 1.0;
        grads[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let send = |v: Var, t: Tensor, grads: &mut Vec<Option<Tensor>>| match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            };
            match &node.op {
                Op::Leaf { .. } => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                    gemm(&g, false, tb, true, &mut ga, false);
                    let mut gb = Tensor::zeros(tb.rows(), tb.cols());
                    gemm(ta, true, &g, false, &mut gb, false);
                    send(*a, ga, &mut grads);
                    send(*b, gb, &mut grads);
                }
                Op::AddRowBias(a, b) => {
                    let d = g.cols();
                    let mut gb = Tensor::zeros(1, d);
                    for (k, v) in g.data.iter().enumerate() {
                        gb.data[k % d] += v;
                    }
                    send(*b, gb, &mut grads);
                    send(*a, g, &mut grads);
                }
                Op::Add(a, b) => {
                    send(*b, g.clone(), &mut grads);
                    send(*a, g, &mut grads);
                }
                Op::Scale(a, s) => {
                    let mut ga = g;
                    ga.data.iter_mut().for_each(|v| *v *= s);
                    send(*a, ga, &mut grads);
                }
                Op::LeakyRelu(a) => {
                    let x = &self.nodes[a.0].value;
                    let mut ga = g;
                    for (v, xi) in ga.data.iter_mut().zip(&x.data) {
                        if *xi < 0.0 {
                            *v *= LEAKY_SLOPE;
                        }
                    }
                    send(*a, ga, &mut grads);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let mut ga = g;
                    for (v, yi) in ga.data.iter_mut().zip(&y.data) {
                        *v *= yi * (1.0 - yi);
                    }
                    send(*a, ga, &mut grads);
                }
                Op::MeanMax { input, argmax } => {
                    let x = &self.nodes[input.0].value;
                    let (n, d) = (x.rows(), x.cols());
                    let mut ga = Tensor::zeros(n, d);
                    for c in 0..d {
                        let gm = g.data[c] / n as f64;
                        for r in 0..n {
                            ga.data[r * d + c] += gm;
                        }
                        ga.data[argmax[c] * d + c] += g.data[d + c];
                    }
                    send(*input, ga, &mut grads);
                }
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for v in parts {
                        let w = self.nodes[v.0].value.cols();
                        let mut gp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            gp.extend_from_slice(&g.row_slice(r)[offset..offset + w]);
                        }
                        send(*v, Tensor::from_vec(rows, w, gp), &mut grads);
                        offset += w;
                    }
                }
                Op::Row(a, index) => {
                    let x = &self.nodes[a.0].value;
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    let d = x.cols();
                    ga.data[index * d..(index + 1) * d].copy_from_slice(&g.data);
                    send(*a, ga, &mut grads);
                }
                Op::SliceCols(a, start, end) => {
                    let x = &self.nodes[a.0].value;
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    let w = end - start;
                    for r in 0..x.rows() {
                        ga.data[r * x.cols() + start..r * x.cols() + end].copy_from_slice(&g.data[r * w..(r + 1) * w]);
                    }
                    send(*a, ga, &mut grads);
                }
                Op::Mse(p, target) => {
                    let x = &self.nodes[p.0].value;
                    let k = 2.0 * g.data[0] / x.len() as f64;
                    let data = x.data.iter().zip(&target.data).map(|(a, b)| k * (a - b)).collect();
                    send(*p, Tensor { shape: x.shape.clone(), data }, &mut grads);
                }
                Op::SignLoss(p, target) => {
                    let x = &self.nodes[p.0].value;
                    let k = g.data[0] / x.len() as f64;
                    let data = x
                        .data
                        .iter()
                        .zip(&target.data)
                        .map(|(a, t)| {
                            let s = sign(*t);
                            if -a * s > 0.0 {
                                -s * k
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    send(*p, Tensor { shape: x.shape.clone(), data }, &mut grads);
                }
            }
        }
        self.grads = grads;
    }

    /// Adds the recorded parameter gradients into `params`.
    pub fn accumulate(&self, params: &mut ParamSet) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Leaf { param: Some(p) }, Some(g)) = (&node.op, self.grads.get(i).and_then(Option::as_ref)) {
                params.params[*p].grad.add_assign(g);
            }
        }
    }
}

pub fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}
