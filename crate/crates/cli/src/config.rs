//! Flat `key = value` config files. One assignment per line, `#` starts
//! a comment, blank lines ignored, unknown keys rejected. Keys mirror the
//! training-config field names one-to-one, plus corpus-generation and
//! ingestion options.

use std::path::Path;

use resgan_core::gan::NormKind;
use resgan_core::ingest::ScaleMode;
use resgan_core::train::{LrSchedule, TrainConfig};

/// Everything a subcommand may pull from defaults, a config file, and
/// CLI overrides (in increasing precedence).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Synthetic corpus image size.
    pub width: usize,
    pub height: usize,
    /// Ingestion scaling.
    pub mode: ScaleMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            width: 400,
            height: 100,
            mode: ScaleMode::Linear,
        }
    }
}

pub fn parse_norm_kind(value: &str) -> Result<NormKind, String> {
    match value {
        "instance" => Ok(NormKind::Instance),
        "batch" => Ok(NormKind::Batch),
        "instance_then_batch" => Ok(NormKind::InstanceThenBatch),
        _ => Err(format!(
            "unknown norm_kind {value:?} (expected instance, batch, or instance_then_batch)"
        )),
    }
}

fn parse_lr_schedule(value: &str) -> Result<LrSchedule, String> {
    if value == "constant" {
        return Ok(LrSchedule::Constant);
    }
    if let Some(start) = value.strip_prefix("linear_decay:") {
        let start_epoch = start
            .parse()
            .map_err(|_| format!("bad linear_decay start epoch {start:?}"))?;
        return Ok(LrSchedule::LinearDecay { start_epoch });
    }
    Err(format!(
        "unknown lr_schedule {value:?} (expected constant or linear_decay:<start_epoch>)"
    ))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("value {value:?} for key {key:?} is not valid"))
}

/// Apply a config file onto `cfg`. Errors name the offending line number.
pub fn apply_config_file(cfg: &mut RunConfig, path: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            format!(
                "{}:{lineno}: expected `key = value`, got {raw:?}",
                path.display()
            )
        })?;
        let key = key.trim();
        let value = value.trim();
        apply_key(cfg, key, value)
            .map_err(|e| format!("{}:{lineno}: {e}", path.display()))?;
    }
    Ok(())
}

fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "epochs" => cfg.train.epochs = parse_num(key, value)?,
        "learning_rate" => cfg.train.learning_rate = parse_num(key, value)?,
        "batch_size" => cfg.train.batch_size = parse_num(key, value)?,
        "crop_w" => cfg.train.crop_w = parse_num(key, value)?,
        "crop_h" => cfg.train.crop_h = parse_num(key, value)?,
        "checkpoint_every" => cfg.train.checkpoint_every = parse_num(key, value)?,
        "lambda_cycle" => cfg.train.lambda_cycle = parse_num(key, value)?,
        "lambda_identity" => cfg.train.lambda_identity = parse_num(key, value)?,
        "pool_capacity" => cfg.train.pool_capacity = parse_num(key, value)?,
        "norm_kind" => cfg.train.norm_kind = parse_norm_kind(value)?,
        "n_res_blocks" => cfg.train.n_res_blocks = parse_num(key, value)?,
        "base_filters" => cfg.train.base_filters = parse_num(key, value)?,
        "seed" => cfg.train.seed = parse_num(key, value)?,
        "lr_schedule" => cfg.train.lr_schedule = parse_lr_schedule(value)?,
        "width" => cfg.width = parse_num(key, value)?,
        "height" => cfg.height = parse_num(key, value)?,
        "mode" => {
            cfg.mode = match value {
                "linear" => ScaleMode::Linear,
                "log" => ScaleMode::Log { offset: 1.0 },
                _ => return Err(format!("unknown mode {value:?} (expected linear or log)")),
            }
        }
        "log_offset" => {
            let offset = parse_num(key, value)?;
            cfg.mode = ScaleMode::Log { offset };
        }
        _ => return Err(format!("unknown config key {key:?}")),
    }
    Ok(())
}

/// Render the effective training configuration, one `key = value` per
/// line, so runs are self-describing.
pub fn echo_train_config(cfg: &TrainConfig) -> String {
    let norm = match cfg.norm_kind {
        NormKind::Instance => "instance",
        NormKind::Batch => "batch",
        NormKind::InstanceThenBatch => "instance_then_batch",
    };
    let schedule = match cfg.lr_schedule {
        LrSchedule::Constant => "constant".to_string(),
        LrSchedule::LinearDecay { start_epoch } => format!("linear_decay:{start_epoch}"),
    };
    format!(
        "epochs = {}\nlearning_rate = {}\nbatch_size = {}\ncrop_w = {}\ncrop_h = {}\n\
         checkpoint_every = {}\nlambda_cycle = {}\nlambda_identity = {}\npool_capacity = {}\n\
         norm_kind = {}\nn_res_blocks = {}\nbase_filters = {}\nseed = {}\nlr_schedule = {}",
        cfg.epochs,
        cfg.learning_rate,
        cfg.batch_size,
        cfg.crop_w,
        cfg.crop_h,
        cfg.checkpoint_every,
        cfg.lambda_cycle,
        cfg.lambda_identity,
        cfg.pool_capacity,
        norm,
        cfg.n_res_blocks,
        cfg.base_filters,
        cfg.seed,
        schedule
    )
}
