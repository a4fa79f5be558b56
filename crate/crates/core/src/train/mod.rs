//! Training loop: unpaired two-domain CycleGAN training with seeded
//! shuffling, random crops, CSV loss logging, and periodic checkpoints.
//!
//! Determinism contract: the whole run is a pure function of
//! (config, corpora). All per-epoch randomness (shuffles, crops, pool
//! replacement) comes from RNG streams derived from (seed, epoch), so a
//! run resumed from an epoch-boundary checkpoint continues exactly like
//! the uninterrupted one.

pub mod checkpoint;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::gan::{
    training_step, CycleGanModel, CycleGanOptimizers, DiscriminatorConfig, GeneratorConfig,
    LossReport, NormKind, Pools,
};
use crate::ingest::{random_crop, to_model_input, GrayImage};
use crate::tensor::{stack_batch, AdamHyper, Tensor};
use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, NamedTensor};

pub const TRAIN_LOG_HEADER: &str =
    "epoch,iter,loss_G_total,loss_D_clean,loss_D_noisy,loss_cycle_clean,loss_cycle_noisy,lr";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Linear decay to zero between `start_epoch` and the final epoch.
    LinearDecay {
        start_epoch: u32,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub crop_w: usize,
    pub crop_h: usize,
    pub checkpoint_every: u32,
    pub lambda_cycle: f32,
    pub lambda_identity: f32,
    pub pool_capacity: usize,
    pub norm_kind: NormKind,
    pub n_res_blocks: usize,
    pub base_filters: usize,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-4,
            batch_size: 2,
            crop_w: 400,
            crop_h: 100,
            checkpoint_every: 5,
            lambda_cycle: 10.0,
            lambda_identity: 0.0,
            pool_capacity: 50,
            norm_kind: NormKind::Instance,
            n_res_blocks: 9,
            base_filters: 64,
            seed: 0,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 1".into(),
            ));
        }
        if self.checkpoint_every < 1 {
            return Err(Error::InvalidArgument(
                "checkpoint_every must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.crop_w == 0 || self.crop_h == 0 || self.crop_w % 4 != 0 || self.crop_h % 4 != 0 {
            return Err(Error::InvalidArgument(format!(
                "crop extents must be positive multiples of 4, got {}x{}",
                self.crop_w, self.crop_h
            )));
        }
        if self.lambda_cycle < 0.0 || self.lambda_identity < 0.0 {
            return Err(Error::InvalidArgument(
                "loss weights must be non-negative".into(),
            ));
        }
        if let LrSchedule::LinearDecay { start_epoch } = self.lr_schedule {
            if start_epoch >= self.epochs {
                return Err(Error::InvalidArgument(format!(
                    "linear decay start_epoch {start_epoch} must be below epochs {}",
                    self.epochs
                )));
            }
        }
        self.generator_config().validate()?;
        self.discriminator_config().validate()
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            in_channels: 1,
            out_channels: 1,
            base_filters: self.base_filters,
            n_res_blocks: self.n_res_blocks,
            norm_kind: self.norm_kind,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            in_channels: 1,
            base_filters: self.base_filters,
            n_layers: 3,
            leaky_slope: 0.2,
            norm_kind: self.norm_kind,
        }
    }
}

/// Learning rate for a given 1-based epoch.
pub fn apply_lr_schedule(config: &TrainConfig, epoch: u32) -> f64 {
    match config.lr_schedule {
        LrSchedule::Constant => config.learning_rate,
        LrSchedule::LinearDecay { start_epoch } => {
            if epoch <= start_epoch {
                config.learning_rate
            } else {
                let num = (config.epochs - epoch) as f64;
                let den = (config.epochs - start_epoch) as f64;
                config.learning_rate * (num / den).max(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainLogRow {
    pub epoch: u32,
    pub iter: u64,
    pub loss_g_total: f64,
    pub loss_d_clean: f64,
    pub loss_d_noisy: f64,
    pub loss_cycle_clean: f64,
    pub loss_cycle_noisy: f64,
    pub lr: f64,
}

impl TrainLogRow {
    fn from_report(epoch: u32, iter: u64, lr: f64, r: &LossReport) -> Self {
        TrainLogRow {
            epoch,
            iter,
            loss_g_total: r.loss_g_total,
            loss_d_clean: r.loss_d_clean,
            loss_d_noisy: r.loss_d_noisy,
            loss_cycle_clean: r.loss_cycle_clean,
            loss_cycle_noisy: r.loss_cycle_noisy,
            lr,
        }
    }

    fn to_csv(self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.iter,
            self.loss_g_total,
            self.loss_d_clean,
            self.loss_d_noisy,
            self.loss_cycle_clean,
            self.loss_cycle_noisy,
            self.lr
        )
    }
}

pub struct TrainOutcome {
    pub rows: Vec<TrainLogRow>,
    pub checkpoint_paths: Vec<PathBuf>,
    pub log_path: PathBuf,
    pub final_epoch: u32,
}

// Distinct derivation streams; all epoch randomness is (seed, epoch, stream).
const STREAM_INIT: u64 = 1;
const STREAM_DATA: u64 = 2;
const STREAM_POOL_CLEAN: u64 = 3;
const STREAM_POOL_NOISY: u64 = 4;

/// splitmix64-style mix of (seed, epoch, stream) into one RNG seed.
fn derive_seed(seed: u64, epoch: u32, stream: u64) -> u64 {
    let mut z = seed
        ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn build_model(config: &TrainConfig) -> Result<CycleGanModel> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, 0, STREAM_INIT));
    CycleGanModel::new(
        config.generator_config(),
        config.discriminator_config(),
        config.lambda_cycle,
        config.lambda_identity,
        &mut rng,
    )
}

// ---- checkpoint <-> live state ----

const META_NAME: &str = "meta.config";
const META_VERSION: u32 = 1;

fn norm_kind_code(kind: NormKind) -> u32 {
    match kind {
        NormKind::Instance => 0,
        NormKind::Batch => 1,
        NormKind::InstanceThenBatch => 2,
    }
}

fn norm_kind_from_code(code: u32) -> Result<NormKind> {
    match code {
        0 => Ok(NormKind::Instance),
        1 => Ok(NormKind::Batch),
        2 => Ok(NormKind::InstanceThenBatch),
        c => Err(Error::InvalidArgument(format!("unknown norm kind code {c}"))),
    }
}

fn meta_tensor(config: &TrainConfig) -> NamedTensor {
    let g = config.generator_config();
    let d = config.discriminator_config();
    NamedTensor::from_u32s(
        META_NAME,
        &[
            META_VERSION,
            g.in_channels as u32,
            g.out_channels as u32,
            g.base_filters as u32,
            g.n_res_blocks as u32,
            norm_kind_code(g.norm_kind),
            d.base_filters as u32,
            d.n_layers as u32,
            config.pool_capacity as u32,
            config.seed as u32,
            (config.seed >> 32) as u32,
            config.lambda_cycle.to_bits(),
            config.lambda_identity.to_bits(),
        ],
    )
}

/// Architecture and loss-weight fields recovered from a checkpoint.
#[derive(Debug, Clone, Copy)]
pub struct CheckpointMeta {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub pool_capacity: usize,
    pub seed: u64,
    pub lambda_cycle: f32,
    pub lambda_identity: f32,
}

pub fn checkpoint_meta(ckpt: &Checkpoint) -> Result<CheckpointMeta> {
    let t = ckpt
        .find(META_NAME)
        .ok_or_else(|| Error::InvalidArgument("checkpoint has no config snapshot".into()))?;
    let v = t.to_u32s();
    if v.len() != 13 || v[0] != META_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported config snapshot (version/len {:?})",
            (v.first().copied(), v.len())
        )));
    }
    let norm_kind = norm_kind_from_code(v[5])?;
    Ok(CheckpointMeta {
        generator: GeneratorConfig {
            in_channels: v[1] as usize,
            out_channels: v[2] as usize,
            base_filters: v[3] as usize,
            n_res_blocks: v[4] as usize,
            norm_kind,
        },
        discriminator: DiscriminatorConfig {
            in_channels: v[1] as usize,
            base_filters: v[6] as usize,
            n_layers: v[7] as usize,
            leaky_slope: 0.2,
            norm_kind,
        },
        pool_capacity: v[8] as usize,
        seed: v[9] as u64 | ((v[10] as u64) << 32),
        lambda_cycle: f32::from_bits(v[11]),
        lambda_identity: f32::from_bits(v[12]),
    })
}

fn shape_u32(shape: &[usize]) -> Vec<u32> {
    shape.iter().map(|&e| e as u32).collect()
}

/// Snapshot model + optimizer + pool state into a checkpoint structure.
pub fn snapshot(
    config: &TrainConfig,
    model: &CycleGanModel,
    opts: &CycleGanOptimizers,
    pools: &Pools,
    epoch: u32,
) -> Checkpoint {
    let mut tensors = Vec::new();
    for (name, t) in model.named_params() {
        tensors.push(NamedTensor::new(name, shape_u32(t.shape()), t.to_vec()));
    }
    for (name, buf) in model.named_buffers() {
        let data = buf.0.borrow().clone();
        tensors.push(NamedTensor::new(name, vec![data.len() as u32], data));
    }
    tensors.push(meta_tensor(config));

    let mut opt = Vec::new();
    for (tag, adam) in [
        ("gen", &opts.generators),
        ("d_clean", &opts.d_clean),
        ("d_noisy", &opts.d_noisy),
    ] {
        for (i, state) in adam.states().iter().enumerate() {
            opt.push(NamedTensor::new(
                format!("opt.{tag}.{i}.m"),
                vec![state.m.len() as u32],
                state.m.clone(),
            ));
            opt.push(NamedTensor::new(
                format!("opt.{tag}.{i}.v"),
                vec![state.v.len() as u32],
                state.v.clone(),
            ));
        }
        let step = adam.states().first().map_or(0, |s| s.step);
        opt.push(NamedTensor::from_u32s(
            format!("opt.{tag}.step"),
            &[step as u32, (step >> 32) as u32],
        ));
    }
    for (tag, pool) in [
        ("fake_clean", &pools.fake_clean),
        ("fake_noisy", &pools.fake_noisy),
    ] {
        opt.push(NamedTensor::from_u32s(
            format!("pool.{tag}.count"),
            &[pool.len() as u32],
        ));
        for (i, img) in pool.stored().iter().enumerate() {
            opt.push(NamedTensor::new(
                format!("pool.{tag}.{i}"),
                shape_u32(img.shape()),
                img.to_vec(),
            ));
        }
    }

    Checkpoint {
        epoch,
        tensors,
        optimizer: Some(opt),
    }
}

/// Copy checkpointed parameters and running statistics into `model`.
/// Rejects missing parameters, unknown names, and shape mismatches.
pub fn load_model_state(model: &CycleGanModel, ckpt: &Checkpoint) -> Result<()> {
    let mut expected: Vec<&str> = vec![META_NAME];
    for (name, param) in model.named_params() {
        let t = ckpt.find(&name).ok_or_else(|| {
            Error::InvalidArgument(format!("checkpoint is missing parameter {name:?}"))
        })?;
        let want = shape_u32(param.shape());
        if t.shape != want {
            return Err(Error::ShapeMismatch(format!(
                "parameter {name:?}: checkpoint shape {:?} vs model shape {:?}",
                t.shape, want
            )));
        }
        param.set_data(t.data.clone());
        expected.push(&t.name);
    }
    for (name, buf) in model.named_buffers() {
        let t = ckpt.find(&name).ok_or_else(|| {
            Error::InvalidArgument(format!("checkpoint is missing buffer {name:?}"))
        })?;
        let len = buf.0.borrow().len() as u32;
        if t.shape != [len] {
            return Err(Error::ShapeMismatch(format!(
                "buffer {name:?}: checkpoint shape {:?} vs model shape [{len}]",
                t.shape
            )));
        }
        *buf.0.borrow_mut() = t.data.clone();
        expected.push(&t.name);
    }
    for t in &ckpt.tensors {
        if !expected.iter().any(|n| *n == t.name) {
            return Err(Error::InvalidArgument(format!(
                "checkpoint contains unknown parameter name {:?}",
                t.name
            )));
        }
    }
    Ok(())
}

fn restore_adam(ckpt: &Checkpoint, tag: &str, adam: &mut crate::tensor::Adam<f32>) -> Result<()> {
    let step_t = ckpt
        .find_opt(&format!("opt.{tag}.step"))
        .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no opt.{tag}.step")))?;
    let sv = step_t.to_u32s();
    if sv.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "opt.{tag}.step must hold two values"
        )));
    }
    let step = sv[0] as u64 | ((sv[1] as u64) << 32);
    for (i, state) in adam.states_mut().iter_mut().enumerate() {
        for (suffix, dst_len) in [("m", state.m.len()), ("v", state.v.len())] {
            let name = format!("opt.{tag}.{i}.{suffix}");
            let t = ckpt
                .find_opt(&name)
                .ok_or_else(|| Error::InvalidArgument(format!("checkpoint is missing {name:?}")))?;
            if t.data.len() != dst_len {
                return Err(Error::ShapeMismatch(format!(
                    "{name:?}: checkpoint length {} vs model length {dst_len}",
                    t.data.len()
                )));
            }
            match suffix {
                "m" => state.m = t.data.clone(),
                _ => state.v = t.data.clone(),
            }
        }
        state.step = step;
    }
    Ok(())
}

fn restore_pools(ckpt: &Checkpoint, pools: &mut Pools) -> Result<()> {
    for (tag, pool) in [
        ("fake_clean", &mut pools.fake_clean),
        ("fake_noisy", &mut pools.fake_noisy),
    ] {
        let count_t = ckpt
            .find_opt(&format!("pool.{tag}.count"))
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no pool.{tag}.count")))?;
        let count = count_t.to_u32s()[0] as usize;
        let mut images = Vec::with_capacity(count);
        for i in 0..count {
            let name = format!("pool.{tag}.{i}");
            let t = ckpt
                .find_opt(&name)
                .ok_or_else(|| Error::InvalidArgument(format!("checkpoint is missing {name:?}")))?;
            let shape: Vec<usize> = t.shape.iter().map(|&e| e as usize).collect();
            images.push(Tensor::new(shape, t.data.clone()));
        }
        pool.restore(images, 0);
    }
    Ok(())
}

fn check_corpora(config: &TrainConfig, clean: &[GrayImage], noisy: &[GrayImage]) -> Result<()> {
    if clean.is_empty() || noisy.is_empty() {
        return Err(Error::InvalidArgument(
            "both training corpora must be non-empty".into(),
        ));
    }
    for (domain, corpus) in [("clean", clean), ("noisy", noisy)] {
        for (i, img) in corpus.iter().enumerate() {
            if img.cols < config.crop_w || img.rows < config.crop_h {
                return Err(Error::InvalidArgument(format!(
                    "{domain} image {i} is {}x{}, smaller than the {}x{} crop",
                    img.cols, img.rows, config.crop_w, config.crop_h
                )));
            }
        }
    }
    let pairs = clean.len().min(noisy.len());
    if pairs / config.batch_size == 0 {
        return Err(Error::InvalidArgument(format!(
            "batch_size {} exceeds the {pairs} available image pairs",
            config.batch_size
        )));
    }
    Ok(())
}

/// Train from scratch. Writes `train_log.csv` and periodic
/// `checkpoint_epoch_*.cgck` files into `output_dir`.
pub fn train(
    config: &TrainConfig,
    clean: &[GrayImage],
    noisy: &[GrayImage],
    output_dir: &Path,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_corpora(config, clean, noisy)?;
    let model = build_model(config)?;
    let mut opts = CycleGanOptimizers::new(
        &model,
        AdamHyper {
            learning_rate: config.learning_rate,
            ..AdamHyper::default()
        },
    );
    let mut pools = Pools::new(config.pool_capacity, 0);
    run_epochs(config, clean, noisy, output_dir, &model, &mut opts, &mut pools, 1)
}

/// Resume from an epoch-boundary checkpoint; continues with epoch
/// `checkpoint.epoch + 1` and reproduces the uninterrupted run exactly.
pub fn resume(
    config: &TrainConfig,
    clean: &[GrayImage],
    noisy: &[GrayImage],
    output_dir: &Path,
    checkpoint_path: &Path,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_corpora(config, clean, noisy)?;
    let ckpt = read_checkpoint(checkpoint_path)?;
    if ckpt.epoch >= config.epochs {
        return Err(Error::InvalidArgument(format!(
            "checkpoint is already at epoch {} of {}",
            ckpt.epoch, config.epochs
        )));
    }
    let meta = checkpoint_meta(&ckpt)?;
    let want = config.generator_config();
    if meta.generator.base_filters != want.base_filters
        || meta.generator.n_res_blocks != want.n_res_blocks
        || meta.generator.norm_kind != want.norm_kind
        || meta.generator.in_channels != want.in_channels
        || meta.generator.out_channels != want.out_channels
    {
        return Err(Error::InvalidArgument(format!(
            "checkpoint architecture {:?} does not match configured {:?}",
            meta.generator, want
        )));
    }
    let model = build_model(config)?;
    load_model_state(&model, &ckpt)?;
    let mut opts = CycleGanOptimizers::new(
        &model,
        AdamHyper {
            learning_rate: config.learning_rate,
            ..AdamHyper::default()
        },
    );
    restore_adam(&ckpt, "gen", &mut opts.generators)?;
    restore_adam(&ckpt, "d_clean", &mut opts.d_clean)?;
    restore_adam(&ckpt, "d_noisy", &mut opts.d_noisy)?;
    let mut pools = Pools::new(config.pool_capacity, 0);
    restore_pools(&ckpt, &mut pools)?;
    run_epochs(
        config,
        clean,
        noisy,
        output_dir,
        &model,
        &mut opts,
        &mut pools,
        ckpt.epoch + 1,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_epochs(
    config: &TrainConfig,
    clean: &[GrayImage],
    noisy: &[GrayImage],
    output_dir: &Path,
    model: &CycleGanModel,
    opts: &mut CycleGanOptimizers,
    pools: &mut Pools,
    start_epoch: u32,
) -> Result<TrainOutcome> {
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let log_path = output_dir.join("train_log.csv");
    let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(file);
    writeln!(log, "{TRAIN_LOG_HEADER}").map_err(|e| Error::io(&log_path, e))?;

    let pairs = clean.len().min(noisy.len());
    let steps_per_epoch = pairs / config.batch_size;
    let mut rows = Vec::new();
    let mut checkpoint_paths = Vec::new();
    model.set_training(true);

    for epoch in start_epoch..=config.epochs {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, epoch, STREAM_DATA));
        pools
            .fake_clean
            .reseed(derive_seed(config.seed, epoch, STREAM_POOL_CLEAN));
        pools
            .fake_noisy
            .reseed(derive_seed(config.seed, epoch, STREAM_POOL_NOISY));
        let lr = apply_lr_schedule(config, epoch);
        opts.set_learning_rate(lr);

        let mut clean_idx: Vec<usize> = (0..clean.len()).collect();
        let mut noisy_idx: Vec<usize> = (0..noisy.len()).collect();
        clean_idx.shuffle(&mut rng);
        noisy_idx.shuffle(&mut rng);

        for step in 0..steps_per_epoch {
            let mut clean_items = Vec::with_capacity(config.batch_size);
            let mut noisy_items = Vec::with_capacity(config.batch_size);
            for b in 0..config.batch_size {
                let ci = clean_idx[step * config.batch_size + b];
                let ni = noisy_idx[step * config.batch_size + b];
                clean_items.push(to_model_input(&random_crop(
                    &clean[ci],
                    config.crop_w,
                    config.crop_h,
                    &mut rng,
                )?));
                noisy_items.push(to_model_input(&random_crop(
                    &noisy[ni],
                    config.crop_w,
                    config.crop_h,
                    &mut rng,
                )?));
            }
            let batch_clean = stack_batch(&clean_items)?;
            let batch_noisy = stack_batch(&noisy_items)?;

            let iter = step as u64 + 1;
            let report = match training_step(model, &batch_clean, &batch_noisy, pools, opts) {
                Ok(r) => r,
                Err(Error::Diverged { reason, .. }) => {
                    // preserve the partial log before surfacing the halt
                    let _ = log.flush();
                    return Err(Error::Diverged {
                        epoch,
                        iter,
                        reason,
                    });
                }
                Err(e) => return Err(e),
            };
            let row = TrainLogRow::from_report(epoch, iter, lr, &report);
            writeln!(log, "{}", row.to_csv()).map_err(|e| Error::io(&log_path, e))?;
            rows.push(row);
        }
        log.flush().map_err(|e| Error::io(&log_path, e))?;

        if epoch % config.checkpoint_every == 0 || epoch == config.epochs {
            let path = output_dir.join(format!("checkpoint_epoch_{epoch:05}.cgck"));
            write_checkpoint(&snapshot(config, model, opts, pools, epoch), &path)?;
            checkpoint_paths.push(path);
        }
    }

    Ok(TrainOutcome {
        rows,
        checkpoint_paths,
        log_path,
        final_epoch: config.epochs,
    })
}

/// Rebuild a full model (generators + discriminators) from a checkpoint
/// alone, using its embedded config snapshot.
pub fn model_from_checkpoint(ckpt: &Checkpoint) -> Result<CycleGanModel> {
    let meta = checkpoint_meta(ckpt)?;
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let model = CycleGanModel::new(
        meta.generator,
        meta.discriminator,
        meta.lambda_cycle,
        meta.lambda_identity,
        &mut rng,
    )?;
    load_model_state(&model, ckpt)?;
    model.set_training(false);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 2,
            crop_w: 32,
            crop_h: 32,
            checkpoint_every: 5,
            pool_capacity: 4,
            n_res_blocks: 1,
            base_filters: 4,
            seed: 42,
            ..TrainConfig::default()
        }
    }

    fn random_corpus(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<GrayImage> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let pixels = (0..rows * cols).map(|_| (rng.next_u32() & 0xff) as u8).collect();
                GrayImage::new(rows, cols, pixels).unwrap()
            })
            .collect()
    }

    #[test]
    fn lr_schedule_constant_and_decay_endpoints() {
        let mut cfg = TrainConfig {
            epochs: 100,
            ..tiny_config()
        };
        assert_eq!(apply_lr_schedule(&cfg, 1), 1e-4);
        assert_eq!(apply_lr_schedule(&cfg, 100), 1e-4);
        cfg.lr_schedule = LrSchedule::LinearDecay { start_epoch: 50 };
        assert_eq!(apply_lr_schedule(&cfg, 50), 1e-4);
        assert_eq!(apply_lr_schedule(&cfg, 100), 0.0);
        assert!((apply_lr_schedule(&cfg, 75) - 0.5e-4).abs() < 1e-12);
    }

    #[test]
    fn one_epoch_four_images_batch_two_logs_two_steps() {
        let dir = tempfile::tempdir().unwrap();
        let clean = random_corpus(4, 34, 36, 1);
        let noisy = random_corpus(4, 34, 36, 2);
        let out = train(&tiny_config(), &clean, &noisy, dir.path()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows[0].epoch, 1);
        assert_eq!(out.rows[0].iter, 1);
        assert_eq!(out.rows[1].iter, 2);
        // final-epoch checkpoint is always written
        assert_eq!(out.checkpoint_paths.len(), 1);
    }

    #[test]
    fn checkpoint_schedule_every_5_epochs_12() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            epochs: 12,
            ..tiny_config()
        };
        let clean = random_corpus(2, 32, 32, 3);
        let noisy = random_corpus(2, 32, 32, 4);
        let out = train(&cfg, &clean, &noisy, dir.path()).unwrap();
        let names: Vec<String> = out
            .checkpoint_paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            vec![
                "checkpoint_epoch_00005.cgck",
                "checkpoint_epoch_00010.cgck",
                "checkpoint_epoch_00012.cgck"
            ]
        );
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = TrainConfig {
            epochs: 2,
            checkpoint_every: 2,
            ..tiny_config()
        };
        let clean = random_corpus(3, 33, 33, 5);
        let noisy = random_corpus(3, 33, 33, 6);
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let out = train(&cfg, &clean, &noisy, dir.path()).unwrap();
            (
                std::fs::read(&out.log_path).unwrap(),
                std::fs::read(&out.checkpoint_paths[0]).unwrap(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn resume_matches_uninterrupted_run_exactly() {
        let cfg = TrainConfig {
            epochs: 4,
            checkpoint_every: 2,
            ..tiny_config()
        };
        let clean = random_corpus(3, 33, 33, 7);
        let noisy = random_corpus(3, 33, 33, 8);

        let full_dir = tempfile::tempdir().unwrap();
        let full = train(&cfg, &clean, &noisy, full_dir.path()).unwrap();
        let mid_ckpt = full_dir.path().join("checkpoint_epoch_00002.cgck");

        let res_dir = tempfile::tempdir().unwrap();
        let resumed = resume(&cfg, &clean, &noisy, res_dir.path(), &mid_ckpt).unwrap();

        let tail: Vec<&TrainLogRow> = full.rows.iter().filter(|r| r.epoch > 2).collect();
        assert_eq!(tail.len(), resumed.rows.len());
        for (a, b) in tail.iter().zip(&resumed.rows) {
            assert_eq!(a.epoch, b.epoch);
            assert_eq!(a.iter, b.iter);
            assert_eq!(a.loss_g_total, b.loss_g_total, "epoch {} iter {}", a.epoch, a.iter);
            assert_eq!(a.loss_d_clean, b.loss_d_clean);
            assert_eq!(a.loss_d_noisy, b.loss_d_noisy);
        }
        let final_full = std::fs::read(full.checkpoint_paths.last().unwrap()).unwrap();
        let final_res = std::fs::read(resumed.checkpoint_paths.last().unwrap()).unwrap();
        assert_eq!(final_full, final_res);
    }

    #[test]
    fn model_round_trips_through_checkpoint() {
        let cfg = tiny_config();
        let model = build_model(&cfg).unwrap();
        let opts = CycleGanOptimizers::new(&model, AdamHyper::default());
        let pools = Pools::new(2, 0);
        let ckpt = snapshot(&cfg, &model, &opts, &pools, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.cgck");
        write_checkpoint(&ckpt, &p).unwrap();
        let loaded = read_checkpoint(&p).unwrap();
        assert_eq!(loaded.epoch, 3);
        let rebuilt = model_from_checkpoint(&loaded).unwrap();
        for ((na, a), (nb, b)) in model.named_params().iter().zip(rebuilt.named_params().iter()) {
            assert_eq!(na, nb);
            assert_eq!(a.to_vec(), b.to_vec(), "param {na}");
        }
    }

    #[test]
    fn mismatched_architecture_is_rejected_with_both_shapes() {
        let cfg = tiny_config();
        let model = build_model(&cfg).unwrap();
        let opts = CycleGanOptimizers::new(&model, AdamHyper::default());
        let pools = Pools::new(2, 0);
        let ckpt = snapshot(&cfg, &model, &opts, &pools, 1);
        let bigger = TrainConfig {
            base_filters: 8,
            ..cfg
        };
        let other = build_model(&bigger).unwrap();
        let err = load_model_state(&other, &ckpt).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[4, 1, 7, 7]") && msg.contains("[8, 1, 7, 7]"), "{msg}");
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = tiny_config();
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        cfg = tiny_config();
        cfg.crop_w = 10;
        assert!(cfg.validate().is_err());
        cfg = tiny_config();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        cfg = tiny_config();
        cfg.epochs = 10;
        cfg.lr_schedule = LrSchedule::LinearDecay { start_epoch: 10 };
        assert!(cfg.validate().is_err());
    }
}
