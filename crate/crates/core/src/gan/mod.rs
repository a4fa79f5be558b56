//! CycleGAN for unpaired clean/noisy radargram translation.
//!
//! Two generators (`g`: clean -> noisy, `f`: noisy -> clean) and two
//! patch discriminators trained with least-squares adversarial losses
//! plus an L1 cycle-consistency penalty.

mod discriminator;
mod generator;
mod layers;
mod pool;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{Generator, GeneratorConfig};
pub use layers::{
    normal, BatchNormLayer, Conv2dLayer, ConvTranspose2dLayer, InstanceNormLayer, NormBuffer,
    NormKind, NormLayer, BATCH_NORM_MOMENTUM, NORM_EPS,
};
pub use pool::ImagePool;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Adam, AdamHyper, Tensor};

/// Least-squares adversarial loss: mean squared distance of patch scores
/// from the target label (1 for real, 0 for fake).
pub fn gan_loss(scores: &Tensor<f32>, target_is_real: bool) -> Tensor<f32> {
    let target = if target_is_real { 1.0 } else { 0.0 };
    scores.add_scalar(-target).square().mean()
}

/// Weighted L1 reconstruction penalty between an original image and its
/// round-trip reconstruction.
pub fn cycle_loss(
    original: &Tensor<f32>,
    reconstructed: &Tensor<f32>,
    lambda: f32,
) -> Result<Tensor<f32>> {
    Ok(original.sub(reconstructed)?.abs().mean().scale(lambda))
}

pub struct CycleGanModel {
    /// clean -> noisy
    pub g: Generator,
    /// noisy -> clean
    pub f: Generator,
    pub d_clean: Discriminator,
    pub d_noisy: Discriminator,
    pub lambda_cycle: f32,
    /// Identity-loss weight relative to `lambda_cycle`; 0 disables it.
    pub lambda_identity: f32,
}

impl CycleGanModel {
    pub fn new(
        gen_cfg: GeneratorConfig,
        disc_cfg: DiscriminatorConfig,
        lambda_cycle: f32,
        lambda_identity: f32,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if lambda_cycle < 0.0 || lambda_identity < 0.0 {
            return Err(Error::InvalidArgument(
                "loss weights must be non-negative".into(),
            ));
        }
        Ok(CycleGanModel {
            g: Generator::new(gen_cfg, rng)?,
            f: Generator::new(gen_cfg, rng)?,
            d_clean: Discriminator::new(disc_cfg, rng)?,
            d_noisy: Discriminator::new(disc_cfg, rng)?,
            lambda_cycle,
            lambda_identity,
        })
    }

    pub fn generator_params(&self) -> Vec<Tensor<f32>> {
        let mut out = self.g.params();
        out.extend(self.f.params());
        out
    }

    /// All trainable parameters with stable hierarchical names.
    pub fn named_params(&self) -> Vec<(String, Tensor<f32>)> {
        let mut out = Vec::new();
        self.g.named_params("g.", &mut out);
        self.f.named_params("f.", &mut out);
        self.d_clean.named_params("d_clean.", &mut out);
        self.d_noisy.named_params("d_noisy.", &mut out);
        out
    }

    /// Batch-norm running statistics with stable hierarchical names.
    pub fn named_buffers(&self) -> Vec<(String, NormBuffer<'_>)> {
        let mut out = Vec::new();
        self.g.named_buffers("g.", &mut out);
        self.f.named_buffers("f.", &mut out);
        self.d_clean.named_buffers("d_clean.", &mut out);
        self.d_noisy.named_buffers("d_noisy.", &mut out);
        out
    }

    pub fn set_training(&self, training: bool) {
        self.g.set_training(training);
        self.f.set_training(training);
        self.d_clean.set_training(training);
        self.d_noisy.set_training(training);
    }

    fn set_discriminators_trainable(&self, trainable: bool) {
        for p in self.d_clean.params() {
            p.set_requires_grad(trainable);
        }
        for p in self.d_noisy.params() {
            p.set_requires_grad(trainable);
        }
    }
}

pub struct CycleGanOptimizers {
    pub generators: Adam<f32>,
    pub d_clean: Adam<f32>,
    pub d_noisy: Adam<f32>,
}

impl CycleGanOptimizers {
    pub fn new(model: &CycleGanModel, hyper: AdamHyper) -> Self {
        CycleGanOptimizers {
            generators: Adam::new(model.generator_params(), hyper),
            d_clean: Adam::new(model.d_clean.params(), hyper),
            d_noisy: Adam::new(model.d_noisy.params(), hyper),
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.generators.set_learning_rate(lr);
        self.d_clean.set_learning_rate(lr);
        self.d_noisy.set_learning_rate(lr);
    }
}

/// History pools for the two fake-image streams.
pub struct Pools {
    pub fake_clean: ImagePool,
    pub fake_noisy: ImagePool,
}

impl Pools {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Pools {
            fake_clean: ImagePool::new(capacity, seed),
            fake_noisy: ImagePool::new(capacity, seed.wrapping_add(1)),
        }
    }
}

/// Per-step losses, all as plain numbers for logging.
#[derive(Debug, Clone, Copy)]
pub struct LossReport {
    pub loss_g_total: f64,
    pub loss_d_clean: f64,
    pub loss_d_noisy: f64,
    pub loss_cycle_clean: f64,
    pub loss_cycle_noisy: f64,
    pub loss_adv_clean: f64,
    pub loss_adv_noisy: f64,
    pub loss_idt_clean: f64,
    pub loss_idt_noisy: f64,
}

fn finite(value: f32, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value as f64)
    } else {
        Err(Error::Diverged {
            epoch: 0,
            iter: 0,
            reason: format!("{what} is not finite ({value})"),
        })
    }
}

/// One optimization step: generator update (discriminators frozen), then
/// one update per discriminator using pooled fakes. Batches must share
/// the same [B,C,H,W] shape.
pub fn training_step(
    model: &CycleGanModel,
    batch_clean: &Tensor<f32>,
    batch_noisy: &Tensor<f32>,
    pools: &mut Pools,
    opts: &mut CycleGanOptimizers,
) -> Result<LossReport> {
    if batch_clean.shape() != batch_noisy.shape() {
        return Err(Error::ShapeMismatch(format!(
            "clean batch {:?} vs noisy batch {:?}",
            batch_clean.shape(),
            batch_noisy.shape()
        )));
    }

    // --- generator update ---
    model.set_discriminators_trainable(false);
    opts.generators.zero_grad();

    let fake_noisy = model.g.forward(batch_clean)?;
    let rec_clean = model.f.forward(&fake_noisy)?;
    let fake_clean = model.f.forward(batch_noisy)?;
    let rec_noisy = model.g.forward(&fake_clean)?;

    let adv_noisy = gan_loss(&model.d_noisy.forward(&fake_noisy)?, true);
    let adv_clean = gan_loss(&model.d_clean.forward(&fake_clean)?, true);
    let cyc_clean = cycle_loss(batch_clean, &rec_clean, model.lambda_cycle)?;
    let cyc_noisy = cycle_loss(batch_noisy, &rec_noisy, model.lambda_cycle)?;

    let mut total = adv_noisy
        .add(&adv_clean)?
        .add(&cyc_clean)?
        .add(&cyc_noisy)?;
    let (idt_clean_v, idt_noisy_v) = if model.lambda_identity > 0.0 {
        let w = model.lambda_cycle * model.lambda_identity;
        // identity terms: each generator applied to its own target domain
        let idt_noisy = cycle_loss(batch_noisy, &model.g.forward(batch_noisy)?, w)?;
        let idt_clean = cycle_loss(batch_clean, &model.f.forward(batch_clean)?, w)?;
        total = total.add(&idt_clean)?.add(&idt_noisy)?;
        (idt_clean.item(), idt_noisy.item())
    } else {
        (0.0, 0.0)
    };

    let loss_g_total = finite(total.item(), "generator loss")?;
    total.backward()?;
    opts.generators.step();
    model.set_discriminators_trainable(true);

    // --- discriminator updates on pooled fakes ---
    let pooled_noisy = pools.fake_noisy.query(&fake_noisy)?;
    opts.d_noisy.zero_grad();
    let d_noisy_loss = gan_loss(&model.d_noisy.forward(batch_noisy)?, true)
        .add(&gan_loss(&model.d_noisy.forward(&pooled_noisy)?, false))?
        .scale(0.5);
    let loss_d_noisy = finite(d_noisy_loss.item(), "noisy-domain discriminator loss")?;
    d_noisy_loss.backward()?;
    opts.d_noisy.step();

    let pooled_clean = pools.fake_clean.query(&fake_clean)?;
    opts.d_clean.zero_grad();
    let d_clean_loss = gan_loss(&model.d_clean.forward(batch_clean)?, true)
        .add(&gan_loss(&model.d_clean.forward(&pooled_clean)?, false))?
        .scale(0.5);
    let loss_d_clean = finite(d_clean_loss.item(), "clean-domain discriminator loss")?;
    d_clean_loss.backward()?;
    opts.d_clean.step();

    Ok(LossReport {
        loss_g_total,
        loss_d_clean,
        loss_d_noisy,
        loss_cycle_clean: cyc_clean.item() as f64,
        loss_cycle_noisy: cyc_noisy.item() as f64,
        loss_adv_clean: adv_clean.item() as f64,
        loss_adv_noisy: adv_noisy.item() as f64,
        loss_idt_clean: idt_clean_v as f64,
        loss_idt_noisy: idt_noisy_v as f64,
    })
}
