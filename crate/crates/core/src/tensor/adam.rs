//! Adam optimizer with bias correction.

use super::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    // beta1 = 0.5 follows common GAN practice.
    fn default() -> Self {
        AdamHyper {
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(numel: usize) -> Self {
        AdamState {
            m: vec![T::zero(); numel],
            v: vec![T::zero(); numel],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update on a raw parameter buffer.
pub fn adam_step<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    state: &mut AdamState<T>,
    hyper: &AdamHyper,
) {
    assert_eq!(param.len(), grad.len());
    assert_eq!(param.len(), state.m.len());
    state.step += 1;
    let b1 = T::from_f64(hyper.beta1);
    let b2 = T::from_f64(hyper.beta2);
    let lr = T::from_f64(hyper.learning_rate);
    let eps = T::from_f64(hyper.epsilon);
    let bc1 = T::from_f64(1.0 - hyper.beta1.powi(state.step as i32));
    let bc2 = T::from_f64(1.0 - hyper.beta2.powi(state.step as i32));
    let one = T::one();
    for i in 0..param.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (one - b1) * g;
        state.v[i] = b2 * state.v[i] + (one - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        param[i] = param[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Optimizer over a fixed parameter list. Parameters without a gradient
/// are skipped (their moments stay untouched).
pub struct Adam<T: Scalar> {
    pub hyper: AdamHyper,
    params: Vec<Tensor<T>>,
    states: Vec<AdamState<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: Vec<Tensor<T>>, hyper: AdamHyper) -> Self {
        let states = params.iter().map(|p| AdamState::new(p.numel())).collect();
        Adam {
            hyper,
            params,
            states,
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.hyper.learning_rate = lr;
    }

    pub fn step(&mut self) {
        for (param, state) in self.params.iter().zip(self.states.iter_mut()) {
            if let Some(grad) = param.grad() {
                let mut data = param.to_vec();
                adam_step(&mut data, &grad, state, &self.hyper);
                param.set_data(data);
            }
        }
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn states(&self) -> &[AdamState<T>] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [AdamState<T>] {
        &mut self.states
    }
}
