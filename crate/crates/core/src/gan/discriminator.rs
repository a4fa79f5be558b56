//! PatchGAN discriminator: a stack of 4x4 convolutions that maps an image
//! to a grid of patch scores rather than a single logit.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gan::layers::{Conv2dLayer, NormBuffer, NormKind, NormLayer};
use crate::tensor::{PadSpec, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct DiscriminatorConfig {
    pub in_channels: usize,
    pub base_filters: usize,
    /// Number of stride-2 convolutions.
    pub n_layers: usize,
    pub leaky_slope: f32,
    pub norm_kind: NormKind,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            in_channels: 1,
            base_filters: 64,
            n_layers: 3,
            leaky_slope: 0.2,
            norm_kind: NormKind::Instance,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.base_filters == 0 {
            return Err(Error::InvalidArgument(
                "discriminator channel counts must be positive".into(),
            ));
        }
        if self.n_layers == 0 {
            return Err(Error::InvalidArgument(
                "discriminator needs at least one stride-2 layer".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::InvalidArgument(format!(
                "leaky_slope must be in [0,1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }

    /// Spatial extents of the patch-score map for an HxW input.
    pub fn patch_extents(&self, mut h: usize, mut w: usize) -> (usize, usize) {
        let step = |n: usize, s: usize| (n + 2 - 4) / s + 1;
        for _ in 0..self.n_layers {
            h = step(h, 2);
            w = step(w, 2);
        }
        // one stride-1 normed conv plus the final score conv
        h = step(step(h, 1), 1);
        w = step(step(w, 1), 1);
        (h, w)
    }
}

pub struct Discriminator {
    pub config: DiscriminatorConfig,
    first: Conv2dLayer,
    mids: Vec<(Conv2dLayer, NormLayer)>,
    last: Conv2dLayer,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let f = config.base_filters;
        let cap = 8 * f;
        // no normalization on the first conv
        let first = Conv2dLayer::new(config.in_channels, f, 4, 2, PadSpec::zero(1), rng);
        let mut mids = Vec::new();
        let mut prev = f;
        for i in 1..config.n_layers {
            let ch = (f << i).min(cap);
            mids.push((
                Conv2dLayer::new(prev, ch, 4, 2, PadSpec::zero(1), rng),
                NormLayer::new(config.norm_kind, ch, rng),
            ));
            prev = ch;
        }
        let ch = (f << config.n_layers).min(cap);
        mids.push((
            Conv2dLayer::new(prev, ch, 4, 1, PadSpec::zero(1), rng),
            NormLayer::new(config.norm_kind, ch, rng),
        ));
        let last = Conv2dLayer::new(ch, 1, 4, 1, PadSpec::zero(1), rng);
        Ok(Discriminator {
            config,
            first,
            mids,
            last,
        })
    }

    /// Input [B, in_channels, H, W] -> patch scores [B, 1, ph, pw].
    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let shape = x.shape();
        if shape.len() != 4 || shape[1] != self.config.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "discriminator expects [B,{},H,W], got {:?}",
                self.config.in_channels, shape
            )));
        }
        let slope = self.config.leaky_slope;
        let mut y = self.first.forward(x)?.leaky_relu(slope);
        for (conv, norm) in &self.mids {
            y = norm.forward(&conv.forward(&y)?)?.leaky_relu(slope);
        }
        self.last.forward(&y)
    }

    pub fn params(&self) -> Vec<Tensor<f32>> {
        let mut out = Vec::new();
        self.first.params(&mut out);
        for (conv, norm) in &self.mids {
            conv.params(&mut out);
            norm.params(&mut out);
        }
        self.last.params(&mut out);
        out
    }

    pub fn named_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        self.first.named(&format!("{prefix}layer0"), out);
        for (i, (conv, norm)) in self.mids.iter().enumerate() {
            conv.named(&format!("{prefix}layer{}", i + 1), out);
            norm.named(&format!("{prefix}layer{}.norm", i + 1), out);
        }
        self.last.named(&format!("{prefix}score"), out);
    }

    pub fn named_buffers<'a>(&'a self, prefix: &str, out: &mut Vec<(String, NormBuffer<'a>)>) {
        for (i, (_, norm)) in self.mids.iter().enumerate() {
            norm.named_buffers(&format!("{prefix}layer{}.norm", i + 1), out);
        }
    }

    pub fn set_training(&self, training: bool) {
        for (_, norm) in &self.mids {
            norm.set_training(training);
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }
}
