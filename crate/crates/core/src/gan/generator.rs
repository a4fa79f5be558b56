//! ResNet-style image-to-image generator.
//!
//! Layout: 7x7 conv (reflection pad 3) -> two stride-2 downsampling convs
//! -> `n_res_blocks` residual blocks -> two stride-2 transposed convs ->
//! 7x7 conv -> tanh. Spatial extents are preserved for inputs whose height
//! and width are divisible by 4.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gan::layers::{Conv2dLayer, ConvTranspose2dLayer, NormBuffer, NormKind, NormLayer};
use crate::tensor::{PadSpec, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct GeneratorConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_filters: usize,
    pub n_res_blocks: usize,
    pub norm_kind: NormKind,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            in_channels: 1,
            out_channels: 1,
            base_filters: 64,
            n_res_blocks: 9,
            norm_kind: NormKind::Instance,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidArgument(
                "generator channel counts must be positive".into(),
            ));
        }
        if self.base_filters == 0 {
            return Err(Error::InvalidArgument(
                "generator base_filters must be positive".into(),
            ));
        }
        if self.n_res_blocks == 0 {
            return Err(Error::InvalidArgument(
                "generator needs at least one residual block".into(),
            ));
        }
        Ok(())
    }
}

struct ConvBlock {
    conv: Conv2dLayer,
    norm: NormLayer,
}

impl ConvBlock {
    fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(self.norm.forward(&self.conv.forward(x)?)?.relu())
    }

    fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        self.conv.named(&format!("{prefix}.conv"), out);
        self.norm.named(&format!("{prefix}.norm"), out);
    }

    fn params(&self, out: &mut Vec<Tensor<f32>>) {
        self.conv.params(out);
        self.norm.params(out);
    }
}

struct UpBlock {
    conv: ConvTranspose2dLayer,
    norm: NormLayer,
}

impl UpBlock {
    fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(self.norm.forward(&self.conv.forward(x)?)?.relu())
    }

    fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        self.conv.named(&format!("{prefix}.conv"), out);
        self.norm.named(&format!("{prefix}.norm"), out);
    }

    fn params(&self, out: &mut Vec<Tensor<f32>>) {
        self.conv.params(out);
        self.norm.params(out);
    }
}

struct ResBlock {
    conv1: Conv2dLayer,
    norm1: NormLayer,
    conv2: Conv2dLayer,
    norm2: NormLayer,
}

impl ResBlock {
    fn new(channels: usize, norm_kind: NormKind, rng: &mut impl Rng) -> Self {
        ResBlock {
            conv1: Conv2dLayer::new(channels, channels, 3, 1, PadSpec::reflection(1), rng),
            norm1: NormLayer::new(norm_kind, channels, rng),
            conv2: Conv2dLayer::new(channels, channels, 3, 1, PadSpec::reflection(1), rng),
            norm2: NormLayer::new(norm_kind, channels, rng),
        }
    }

    fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let y = self.norm1.forward(&self.conv1.forward(x)?)?.relu();
        let y = self.norm2.forward(&self.conv2.forward(&y)?)?;
        x.add(&y)
    }

    fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        self.conv1.named(&format!("{prefix}.conv1"), out);
        self.norm1.named(&format!("{prefix}.norm1"), out);
        self.conv2.named(&format!("{prefix}.conv2"), out);
        self.norm2.named(&format!("{prefix}.norm2"), out);
    }

    fn params(&self, out: &mut Vec<Tensor<f32>>) {
        self.conv1.params(out);
        self.norm1.params(out);
        self.conv2.params(out);
        self.norm2.params(out);
    }
}

pub struct Generator {
    pub config: GeneratorConfig,
    head: ConvBlock,
    down1: ConvBlock,
    down2: ConvBlock,
    blocks: Vec<ResBlock>,
    up1: UpBlock,
    up2: UpBlock,
    tail: Conv2dLayer,
}

impl Generator {
    pub fn new(config: GeneratorConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let f = config.base_filters;
        let nk = config.norm_kind;
        let head = ConvBlock {
            conv: Conv2dLayer::new(config.in_channels, f, 7, 1, PadSpec::reflection(3), rng),
            norm: NormLayer::new(nk, f, rng),
        };
        let down1 = ConvBlock {
            conv: Conv2dLayer::new(f, 2 * f, 3, 2, PadSpec::zero(1), rng),
            norm: NormLayer::new(nk, 2 * f, rng),
        };
        let down2 = ConvBlock {
            conv: Conv2dLayer::new(2 * f, 4 * f, 3, 2, PadSpec::zero(1), rng),
            norm: NormLayer::new(nk, 4 * f, rng),
        };
        let blocks = (0..config.n_res_blocks)
            .map(|_| ResBlock::new(4 * f, nk, rng))
            .collect();
        let up1 = UpBlock {
            conv: ConvTranspose2dLayer::new(4 * f, 2 * f, 3, 2, 1, 1, rng),
            norm: NormLayer::new(nk, 2 * f, rng),
        };
        let up2 = UpBlock {
            conv: ConvTranspose2dLayer::new(2 * f, f, 3, 2, 1, 1, rng),
            norm: NormLayer::new(nk, f, rng),
        };
        let tail = Conv2dLayer::new(f, config.out_channels, 7, 1, PadSpec::reflection(3), rng);
        Ok(Generator {
            config,
            head,
            down1,
            down2,
            blocks,
            up1,
            up2,
            tail,
        })
    }

    /// Input must be [B, in_channels, H, W] with H and W divisible by 4;
    /// output is [B, out_channels, H, W] with values in (-1, 1).
    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let shape = x.shape();
        if shape.len() != 4 || shape[1] != self.config.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "generator expects [B,{},H,W], got {:?}",
                self.config.in_channels, shape
            )));
        }
        if shape[2] % 4 != 0 || shape[3] % 4 != 0 {
            return Err(Error::ShapeMismatch(format!(
                "generator input extents must be divisible by 4, got {}x{}",
                shape[2], shape[3]
            )));
        }
        let mut y = self.head.forward(x)?;
        y = self.down1.forward(&y)?;
        y = self.down2.forward(&y)?;
        for block in &self.blocks {
            y = block.forward(&y)?;
        }
        y = self.up1.forward(&y)?;
        y = self.up2.forward(&y)?;
        Ok(self.tail.forward(&y)?.tanh_act())
    }

    /// Trainable parameters in a fixed deterministic order.
    pub fn params(&self) -> Vec<Tensor<f32>> {
        let mut out = Vec::new();
        self.head.params(&mut out);
        self.down1.params(&mut out);
        self.down2.params(&mut out);
        for block in &self.blocks {
            block.params(&mut out);
        }
        self.up1.params(&mut out);
        self.up2.params(&mut out);
        self.tail.params(&mut out);
        out
    }

    pub fn named_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<f32>)>) {
        self.head.named(&format!("{prefix}head"), out);
        self.down1.named(&format!("{prefix}down1"), out);
        self.down2.named(&format!("{prefix}down2"), out);
        for (i, block) in self.blocks.iter().enumerate() {
            block.named(&format!("{prefix}block{i}"), out);
        }
        self.up1.named(&format!("{prefix}up1"), out);
        self.up2.named(&format!("{prefix}up2"), out);
        self.tail.named(&format!("{prefix}tail"), out);
    }

    pub fn named_buffers<'a>(&'a self, prefix: &str, out: &mut Vec<(String, NormBuffer<'a>)>) {
        self.head.norm.named_buffers(&format!("{prefix}head.norm"), out);
        self.down1.norm.named_buffers(&format!("{prefix}down1.norm"), out);
        self.down2.norm.named_buffers(&format!("{prefix}down2.norm"), out);
        for (i, block) in self.blocks.iter().enumerate() {
            block.norm1.named_buffers(&format!("{prefix}block{i}.norm1"), out);
            block.norm2.named_buffers(&format!("{prefix}block{i}.norm2"), out);
        }
        self.up1.norm.named_buffers(&format!("{prefix}up1.norm"), out);
        self.up2.norm.named_buffers(&format!("{prefix}up2.norm"), out);
    }

    pub fn set_training(&self, training: bool) {
        self.head.norm.set_training(training);
        self.down1.norm.set_training(training);
        self.down2.norm.set_training(training);
        for block in &self.blocks {
            block.norm1.set_training(training);
            block.norm2.set_training(training);
        }
        self.up1.norm.set_training(training);
        self.up2.norm.set_training(training);
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }
}
