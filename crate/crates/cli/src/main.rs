//! Command-line front end for the radargram layer-highlighting pipeline:
//! synthetic corpus generation, raw-grid ingestion, CycleGAN training,
//! translation, and full-cycle evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training
//! divergence.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use resgan_core::eval::{
    composite, full_cycle, psnr, translate_image, within_band, MetricsReport, MetricsRow,
};
use resgan_core::ingest::{read_rgrid, to_grayscale, GrayImage, ScaleMode};
use resgan_core::train::checkpoint::read_checkpoint;
use resgan_core::train::{model_from_checkpoint, resume, train};
use resgan_core::wedge::{generate_corpus, RandomizationRanges};
use resgan_core::Error;

use config::{apply_config_file, echo_train_config, RunConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "resgan",
    version,
    about = "Unpaired radargram layer highlighting: synthesize, ingest, train, translate, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// Apply the noisy-to-clean generator.
    #[value(name = "to_clean")]
    ToClean,
    /// Apply the clean-to-noisy generator.
    #[value(name = "to_noisy")]
    ToNoisy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Linear,
    Log,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic two-domain training corpus (wedge images and
    /// stripe-injected surrogates) plus a manifest.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        n_clean: usize,
        #[arg(long, default_value_t = 5)]
        n_noisy: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Image width in traces.
        #[arg(long)]
        width: Option<usize>,
        /// Image height in samples.
        #[arg(long)]
        height: Option<usize>,
    },
    /// Convert raw RG1 grids to grayscale PNGs.
    Ingest {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Value scaling before the min-max map.
        #[arg(long)]
        mode: Option<Mode>,
        /// Offset added before log10 in log mode.
        #[arg(long)]
        log_offset: Option<f64>,
        /// RG1 input files.
        files: Vec<PathBuf>,
    },
    /// Train the translation model on two unpaired PNG corpora.
    Train {
        #[arg(long)]
        clean_dir: PathBuf,
        #[arg(long)]
        noisy_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long = "lr")]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Crop size as WxH, e.g. 400x100.
        #[arg(long)]
        crop: Option<String>,
        #[arg(long)]
        checkpoint_every: Option<u32>,
        #[arg(long)]
        res_blocks: Option<usize>,
        #[arg(long)]
        base_filters: Option<usize>,
        /// Continue from an epoch-boundary checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Translate images with one generator from a checkpoint.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        direction: Direction,
        #[arg(long)]
        out_dir: PathBuf,
        /// PNG images to translate.
        images: Vec<PathBuf>,
    },
    /// Full-cycle MSE/PSNR evaluation of a checkpoint over a noisy corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        noisy_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Fail (data-error exit) if any record falls outside the
        /// (0.01, 0.1) MSE band.
        #[arg(long)]
        enforce_band: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } => EXIT_DIVERGED,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_run_config(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        apply_config_file(&mut cfg, p).map_err(Failure::usage)?;
    }
    Ok(cfg)
}

fn parse_crop(spec: &str) -> Result<(usize, usize), Failure> {
    let (w, h) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| Failure::usage(format!("--crop expects WxH, got {spec:?}")))?;
    let w = w
        .parse()
        .map_err(|_| Failure::usage(format!("bad crop width {w:?}")))?;
    let h = h
        .parse()
        .map_err(|_| Failure::usage(format!("bad crop height {h:?}")))?;
    Ok((w, h))
}

fn png_corpus(dir: &Path) -> Result<Vec<(String, GrayImage)>, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push((stem, GrayImage::load_png(&p)?));
    }
    if out.is_empty() {
        return Err(Failure::data(format!(
            "no PNG images found in {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Synth {
            out_dir,
            n_clean,
            n_noisy,
            config,
            seed,
            width,
            height,
        } => {
            let mut cfg = load_run_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(w) = width {
                cfg.width = w;
            }
            if let Some(h) = height {
                cfg.height = h;
            }
            let ranges = RandomizationRanges::with_size(cfg.width, cfg.height);
            let entries = generate_corpus(&ranges, n_clean, n_noisy, cfg.train.seed, &out_dir)?;
            println!(
                "wrote {} images and manifest.tsv to {}",
                entries.len(),
                out_dir.display()
            );
            Ok(())
        }

        Cmd::Ingest {
            out_dir,
            config,
            mode,
            log_offset,
            files,
        } => {
            let cfg = load_run_config(config.as_ref())?;
            let mode = match (mode, log_offset) {
                (Some(Mode::Linear), _) => ScaleMode::Linear,
                (Some(Mode::Log), offset) => ScaleMode::Log {
                    offset: offset.unwrap_or(1.0),
                },
                (None, Some(offset)) => ScaleMode::Log { offset },
                (None, None) => cfg.mode,
            };
            if files.is_empty() {
                return Ok(());
            }
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Failure::data(format!("cannot create {}: {e}", out_dir.display())))?;
            let mut failures = 0usize;
            for file in &files {
                match read_rgrid(file).and_then(|g| to_grayscale(&g, mode)) {
                    Ok(image) => {
                        let stem = file
                            .file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_else(|| "grid".into());
                        image.save_png(&out_dir.join(format!("{stem}.png")))?;
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        failures += 1;
                    }
                }
            }
            if failures > 0 {
                return Err(Failure::data(format!(
                    "{failures} of {} input files failed",
                    files.len()
                )));
            }
            Ok(())
        }

        Cmd::Train {
            clean_dir,
            noisy_dir,
            out_dir,
            config,
            seed,
            epochs,
            learning_rate,
            batch_size,
            crop,
            checkpoint_every,
            res_blocks,
            base_filters,
            resume: resume_from,
        } => {
            let mut cfg = load_run_config(config.as_ref())?;
            if let Some(v) = seed {
                cfg.train.seed = v;
            }
            if let Some(v) = epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = learning_rate {
                cfg.train.learning_rate = v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = v;
            }
            if let Some(spec) = crop.as_deref() {
                let (w, h) = parse_crop(spec)?;
                cfg.train.crop_w = w;
                cfg.train.crop_h = h;
            }
            if let Some(v) = checkpoint_every {
                cfg.train.checkpoint_every = v;
            }
            if let Some(v) = res_blocks {
                cfg.train.n_res_blocks = v;
            }
            if let Some(v) = base_filters {
                cfg.train.base_filters = v;
            }
            cfg.train
                .validate()
                .map_err(|e| Failure::usage(e.to_string()))?;
            println!("effective configuration:");
            println!("{}", echo_train_config(&cfg.train));

            let clean: Vec<GrayImage> = png_corpus(&clean_dir)?
                .into_iter()
                .map(|(_, img)| img)
                .collect();
            let noisy: Vec<GrayImage> = png_corpus(&noisy_dir)?
                .into_iter()
                .map(|(_, img)| img)
                .collect();
            let outcome = match resume_from {
                Some(ckpt) => resume(&cfg.train, &clean, &noisy, &out_dir, &ckpt)?,
                None => train(&cfg.train, &clean, &noisy, &out_dir)?,
            };
            println!(
                "trained to epoch {}; {} checkpoints, log at {}",
                outcome.final_epoch,
                outcome.checkpoint_paths.len(),
                outcome.log_path.display()
            );
            Ok(())
        }

        Cmd::Translate {
            checkpoint,
            direction,
            out_dir,
            images,
        } => {
            if images.is_empty() {
                return Ok(());
            }
            let ckpt = read_checkpoint(&checkpoint)?;
            let model = model_from_checkpoint(&ckpt)?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Failure::data(format!("cannot create {}: {e}", out_dir.display())))?;
            for path in &images {
                let image = GrayImage::load_png(path)?;
                let (generator, tag) = match direction {
                    Direction::ToClean => (&model.f, "to_clean"),
                    Direction::ToNoisy => (&model.g, "to_noisy"),
                };
                let translated = translate_image(generator, &image)?;
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "image".into());
                translated.save_png(&out_dir.join(format!("{stem}_{tag}.png")))?;
                composite(&image, &translated)?
                    .save_png(&out_dir.join(format!("{stem}_composite.png")))?;
            }
            Ok(())
        }

        Cmd::Eval {
            checkpoint,
            noisy_dir,
            out_dir,
            enforce_band,
        } => {
            let ckpt = read_checkpoint(&checkpoint)?;
            let model = model_from_checkpoint(&ckpt)?;
            let corpus = png_corpus(&noisy_dir)?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Failure::data(format!("cannot create {}: {e}", out_dir.display())))?;
            let mut rows = Vec::with_capacity(corpus.len());
            for (record, image) in &corpus {
                let cycle = full_cycle(&model, image)?;
                let m = resgan_core::eval::mse(image, &cycle.reconstruction)?;
                rows.push(MetricsRow {
                    record: record.clone(),
                    mse: m,
                    psnr: psnr(m)?,
                    within_band: within_band(m),
                });
                composite(image, &cycle.clean_translation)?
                    .save_png(&out_dir.join(format!("{record}_composite.png")))?;
            }
            let report = MetricsReport::from_rows(rows)?;
            let table = report.to_text_table();
            print!("{table}");
            std::fs::write(out_dir.join("report.txt"), &table)
                .map_err(|e| Failure::data(format!("cannot write report.txt: {e}")))?;
            std::fs::write(out_dir.join("report.csv"), report.to_csv())
                .map_err(|e| Failure::data(format!("cannot write report.csv: {e}")))?;
            if enforce_band && !report.all_within_band {
                return Err(Failure::data(
                    "at least one record falls outside the (0.01, 0.1) MSE band",
                ));
            }
            Ok(())
        }
    }
}
