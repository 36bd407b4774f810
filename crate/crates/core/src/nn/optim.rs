use super::ParamSet;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, steps: 0 }
    }
}

impl Adam {
    /// Applies one update with learning rate `lr` using the accumulated grads.
    pub fn step(&mut self, params: &mut ParamSet, lr: f64) {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for p in &mut params.params {
            for i in 0..p.value.data.len() {
                let g = p.grad.data[i];
                let m = self.beta1 * p.adam_m.data[i] + (1.0 - self.beta1) * g;
                let v = self.beta2 * p.adam_v.data[i] + (1.0 - self.beta2) * g * g;
                p.adam_m.data[i] = m;
                p.adam_v.data[i] = v;
                p.value.data[i] -= lr * (m / c1) / ((v / c2).sqrt() + self.eps);
            }
        }
    }
}

/// `base * gamma^floor(t / step)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLr {
    pub base: f64,
    pub gamma: f64,
    pub step: u64,
}

impl StepLr {
    pub fn lr(&self, t: u64) -> f64 {
        self.base * self.gamma.powi((t / self.step.max(1)) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Tape, Tensor};

    #[test]
    fn step_schedule() {
        let s = StepLr { base: 1e-4, gamma: 0.95, step: 500 };
        assert_eq!(s.lr(0), 1e-4);
        assert_eq!(s.lr(499), 1e-4);
        assert!((s.lr(500) - 9.5e-5).abs() < 1e-18);
        assert!((s.lr(1000) - 1e-4 * 0.9025).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut params = ParamSet::default();
        params.push("w", Tensor::row(vec![0.3, -0.7]));
        let before = params.params[0].value.clone();
        let mut adam = Adam::default();
        for _ in 0..5 {
            adam.step(&mut params, 0.1);
        }
        assert_eq!(params.params[0].value, before);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut params = ParamSet::default();
        params.push("w", Tensor::row(vec![3.0, -2.0]));
        let target = Tensor::row(vec![1.0, 0.5]);
        let mut adam = Adam::default();
        for _ in 0..2000 {
            params.zero_grad();
            let mut tape = Tape::new();
            let w = tape.param(&params, 0);
            let l = tape.mse(w, target.clone()).unwrap();
            tape.backward(l);
            tape.accumulate(&mut params);
            adam.step(&mut params, 0.01);
        }
        for (a, b) in params.params[0].value.data.iter().zip(&target.data) {
            assert!((a - b).abs() < 1e-3);
        }
    }
}
