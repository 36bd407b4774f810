//! Minimal dense-tensor toolkit: tape-based reverse mode, dense and graph
//! convolution layers, Adam with step decay, and parameter snapshots.

mod optim;
mod snapshot;
mod tape;
mod tensor;

pub use optim::{Adam, StepLr};
pub use snapshot::{load_params, read_params, save_params, write_params, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use tape::{sign, Tape, Var, LEAKY_SLOPE};
pub use tensor::{matmul, Tensor};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let (r, c) = (value.rows(), value.cols());
        Parameter { name: name.into(), value, grad: Tensor::zeros(r, c), adam_m: Tensor::zeros(r, c), adam_v: Tensor::zeros(r, c) }
    }
}

/// Flat list of trainable tensors owned by one model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub params: Vec<Parameter>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.params.push(Parameter::new(name, value));
        self.params.len() - 1
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }
}

/// Affine layer `x W + b` with `W: d_in x d_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: usize,
    pub bias: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    /// Uniform(-1/sqrt(d_in), 1/sqrt(d_in)) initialization for weights and bias.
    pub fn new(params: &mut ParamSet, name: &str, d_in: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        let w = (0..d_in * d_out).map(|_| rng.gen_range(-bound..bound)).collect();
        let b = (0..d_out).map(|_| rng.gen_range(-bound..bound)).collect();
        let weight = params.push(format!("{name}.weight"), Tensor::from_vec(d_in, d_out, w));
        let bias = params.push(format!("{name}.bias"), Tensor::from_vec(1, d_out, b));
        Linear { weight, bias, d_in, d_out }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let h = tape.matmul(x, w)?;
        tape.add_bias(h, b)
    }

    pub fn scalar_count(&self) -> usize {
        self.d_in * self.d_out + self.d_out
    }
}

/// Stack of linear layers with leaky-ReLU between them (none after the last).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(params: &mut ParamSet, name: &str, widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(params, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, mut x: Var) -> Result<Var> {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, params, x)?;
            if i < last {
                x = tape.leaky_relu(x);
            }
        }
        Ok(x)
    }

    pub fn scalar_count(&self) -> usize {
        self.layers.iter().map(Linear::scalar_count).sum()
    }
}

/// Symmetric-normalized adjacency with self-loops, `D^-1/2 (A + I) D^-1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyNorm {
    pub n: usize,
    pub matrix: Tensor,
}

impl AdjacencyNorm {
    /// Directed edges are symmetrized before normalization.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut a = Tensor::identity(n);
        for &(i, j) in edges {
            a.data[i * n + j] = 1.0;
            a.data[j * n + i] = 1.0;
        }
        let deg: Vec<f64> = (0..n).map(|i| a.row_slice(i).iter().sum()).collect();
        for i in 0..n {
            for j in 0..n {
                a.data[i * n + j] /= (deg[i] * deg[j]).sqrt();
            }
        }
        AdjacencyNorm { n, matrix: a }
    }
}

/// Graph convolution `Â X W + b`; the caller applies the activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConv {
    pub weight: usize,
    pub bias: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl GraphConv {
    /// Glorot-uniform weights, zero bias.
    pub fn new(params: &mut ParamSet, name: &str, d_in: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (d_in + d_out) as f64).sqrt();
        let w = (0..d_in * d_out).map(|_| rng.gen_range(-bound..bound)).collect();
        let weight = params.push(format!("{name}.weight"), Tensor::from_vec(d_in, d_out, w));
        let bias = params.push(format!("{name}.bias"), Tensor::zeros(1, d_out));
        GraphConv { weight, bias, d_in, d_out }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var, adj: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let xw = tape.matmul(x, w)?;
        let mixed = tape.matmul(adj, xw)?;
        tape.add_bias(mixed, b)
    }

    pub fn scalar_count(&self) -> usize {
        self.d_in * self.d_out + self.d_out
    }
}

/// Maximum relative error between analytic and central-difference gradients.
///
/// `f` evaluates the scalar loss for a flat parameter vector; `grad` is the
/// analytic gradient at `x`.
pub fn gradient_check(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64], h: f64) -> f64 {
    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let denom = numeric.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max((numeric - grad[i]).abs() / denom);
    }
    worst
}
