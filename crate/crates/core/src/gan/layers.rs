//! Network building blocks over the f32 tensor core.

use std::cell::{Cell, RefCell};

use rand::Rng;

use crate::error::Result;
use crate::tensor::{
    batch_norm_infer, batch_norm_train, conv2d, conv_transpose2d, instance_norm, PadSpec, Tensor,
};

pub const NORM_EPS: f32 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f32 = 0.1;

/// Normalization wiring for a layer stack. `InstanceThenBatch` applies
/// both sequentially, each with its own affine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Instance,
    Batch,
    InstanceThenBatch,
}

/// Gaussian sample via Box-Muller; keeps initialization deterministic
/// without further dependencies.
pub fn normal(rng: &mut impl Rng, mean: f32, std: f32) -> f32 {
    let u1: f64 = loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            break v;
        }
    };
    let u2: f64 = rng.random();
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    mean + std * z as f32
}

fn normal_vec(rng: &mut impl Rng, n: usize, mean: f32, std: f32) -> Vec<f32> {
    (0..n).map(|_| normal(rng, mean, std)).collect()
}

pub struct Conv2dLayer {
    pub weight: Tensor<f32>,
    pub bias: Tensor<f32>,
    pub stride: usize,
    pub pad: PadSpec,
}

impl Conv2dLayer {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: PadSpec,
        rng: &mut impl Rng,
    ) -> Self {
        // normal(0, 0.02) init, biases zero
        let weight = Tensor::param(
            vec![out_ch, in_ch, kernel, kernel],
            normal_vec(rng, out_ch * in_ch * kernel * kernel, 0.0, 0.02),
        );
        let bias = Tensor::param(vec![out_ch], vec![0.0; out_ch]);
        Conv2dLayer {
            weight,
            bias,
            stride,
            pad,
        }
    }

    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        conv2d(x, &self.weight, Some(&self.bias), self.stride, self.pad)
    }

    pub fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        out.push((format!("{prefix}.bias"), self.bias.clone()));
    }

    pub fn params(&self, out: &mut Vec<Tensor<f32>>) {
        out.push(self.weight.clone());
        out.push(self.bias.clone());
    }
}

pub struct ConvTranspose2dLayer {
    pub weight: Tensor<f32>,
    pub bias: Tensor<f32>,
    pub stride: usize,
    pub pad: usize,
    pub output_pad: usize,
}

impl ConvTranspose2dLayer {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        output_pad: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = Tensor::param(
            vec![in_ch, out_ch, kernel, kernel],
            normal_vec(rng, in_ch * out_ch * kernel * kernel, 0.0, 0.02),
        );
        let bias = Tensor::param(vec![out_ch], vec![0.0; out_ch]);
        ConvTranspose2dLayer {
            weight,
            bias,
            stride,
            pad,
            output_pad,
        }
    }

    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        conv_transpose2d(
            x,
            &self.weight,
            Some(&self.bias),
            self.stride,
            self.pad,
            self.output_pad,
        )
    }

    pub fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        out.push((format!("{prefix}.bias"), self.bias.clone()));
    }

    pub fn params(&self, out: &mut Vec<Tensor<f32>>) {
        out.push(self.weight.clone());
        out.push(self.bias.clone());
    }
}

pub struct InstanceNormLayer {
    pub gamma: Tensor<f32>,
    pub beta: Tensor<f32>,
}

impl InstanceNormLayer {
    pub fn new(channels: usize, rng: &mut impl Rng) -> Self {
        InstanceNormLayer {
            gamma: Tensor::param(vec![channels], normal_vec(rng, channels, 1.0, 0.02)),
            beta: Tensor::param(vec![channels], vec![0.0; channels]),
        }
    }

    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        instance_norm(x, &self.gamma, &self.beta, NORM_EPS)
    }
}

pub struct BatchNormLayer {
    pub gamma: Tensor<f32>,
    pub beta: Tensor<f32>,
    pub running_mean: RefCell<Vec<f32>>,
    pub running_var: RefCell<Vec<f32>>,
    pub training: Cell<bool>,
}

impl BatchNormLayer {
    pub fn new(channels: usize, rng: &mut impl Rng) -> Self {
        BatchNormLayer {
            gamma: Tensor::param(vec![channels], normal_vec(rng, channels, 1.0, 0.02)),
            beta: Tensor::param(vec![channels], vec![0.0; channels]),
            running_mean: RefCell::new(vec![0.0; channels]),
            running_var: RefCell::new(vec![1.0; channels]),
            training: Cell::new(true),
        }
    }

    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        if self.training.get() {
            let (y, mean, var) = batch_norm_train(x, &self.gamma, &self.beta, NORM_EPS)?;
            let m = BATCH_NORM_MOMENTUM;
            let mut rm = self.running_mean.borrow_mut();
            let mut rv = self.running_var.borrow_mut();
            for c in 0..rm.len() {
                rm[c] = (1.0 - m) * rm[c] + m * mean[c];
                rv[c] = (1.0 - m) * rv[c] + m * var[c];
            }
            Ok(y)
        } else {
            batch_norm_infer(
                x,
                &self.gamma,
                &self.beta,
                &self.running_mean.borrow(),
                &self.running_var.borrow(),
                NORM_EPS,
            )
        }
    }
}

/// One normalization stage as configured by [`NormKind`].
pub enum NormLayer {
    Instance(InstanceNormLayer),
    Batch(BatchNormLayer),
    InstanceThenBatch(InstanceNormLayer, BatchNormLayer),
}

impl NormLayer {
    pub fn new(kind: NormKind, channels: usize, rng: &mut impl Rng) -> Self {
        match kind {
            NormKind::Instance => NormLayer::Instance(InstanceNormLayer::new(channels, rng)),
            NormKind::Batch => NormLayer::Batch(BatchNormLayer::new(channels, rng)),
            NormKind::InstanceThenBatch => NormLayer::InstanceThenBatch(
                InstanceNormLayer::new(channels, rng),
                BatchNormLayer::new(channels, rng),
            ),
        }
    }

    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        match self {
            NormLayer::Instance(n) => n.forward(x),
            NormLayer::Batch(n) => n.forward(x),
            NormLayer::InstanceThenBatch(i, b) => b.forward(&i.forward(x)?),
        }
    }

    pub fn set_training(&self, training: bool) {
        match self {
            NormLayer::Instance(_) => {}
            NormLayer::Batch(b) => b.training.set(training),
            NormLayer::InstanceThenBatch(_, b) => b.training.set(training),
        }
    }

    pub fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        match self {
            NormLayer::Instance(n) => {
                out.push((format!("{prefix}.gamma"), n.gamma.clone()));
                out.push((format!("{prefix}.beta"), n.beta.clone()));
            }
            NormLayer::Batch(n) => {
                out.push((format!("{prefix}.gamma"), n.gamma.clone()));
                out.push((format!("{prefix}.beta"), n.beta.clone()));
            }
            NormLayer::InstanceThenBatch(i, b) => {
                out.push((format!("{prefix}.inst.gamma"), i.gamma.clone()));
                out.push((format!("{prefix}.inst.beta"), i.beta.clone()));
                out.push((format!("{prefix}.batch.gamma"), b.gamma.clone()));
                out.push((format!("{prefix}.batch.beta"), b.beta.clone()));
            }
        }
    }

    pub fn params(&self, out: &mut Vec<Tensor<f32>>) {
        match self {
            NormLayer::Instance(n) => {
                out.push(n.gamma.clone());
                out.push(n.beta.clone());
            }
            NormLayer::Batch(n) => {
                out.push(n.gamma.clone());
                out.push(n.beta.clone());
            }
            NormLayer::InstanceThenBatch(i, b) => {
                out.push(i.gamma.clone());
                out.push(i.beta.clone());
                out.push(b.gamma.clone());
                out.push(b.beta.clone());
            }
        }
    }

    /// Non-trainable state (batch-norm running statistics), exposed as
    /// named buffers for checkpointing.
    pub fn named_buffers<'a>(&'a self, prefix: &str, out: &mut Vec<(String, NormBuffer<'a>)>) {
        match self {
            NormLayer::Instance(_) => {}
            NormLayer::Batch(b) => {
                out.push((format!("{prefix}.running_mean"), NormBuffer(&b.running_mean)));
                out.push((format!("{prefix}.running_var"), NormBuffer(&b.running_var)));
            }
            NormLayer::InstanceThenBatch(_, b) => {
                out.push((format!("{prefix}.batch.running_mean"), NormBuffer(&b.running_mean)));
                out.push((format!("{prefix}.batch.running_var"), NormBuffer(&b.running_var)));
            }
        }
    }
}

/// Borrowed handle to a running-statistics buffer.
pub struct NormBuffer<'a>(pub &'a RefCell<Vec<f32>>);
