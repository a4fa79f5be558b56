//! Clean-domain synthetic radargrams and noisy-domain surrogates.
//!
//! A three-layer wedge model (top / tapering wedge / bottom) is filled
//! with acoustic-impedance analogs, turned into per-trace reflection
//! coefficients, convolved with a Ricker wavelet, and min-max scaled to
//! an 8-bit image. Strip noise (vertical, horizontal, diagonal bands) is
//! injected additively to build self-contained noisy surrogates when no
//! real RES corpus is at hand.
//!
//! Corpus output: PNGs plus a manifest with one line per image,
//! `filename<TAB>domain<TAB>seed`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::ingest::{to_grayscale, GrayImage, RadarGrid, ScaleMode};

/// Parameters of one synthetic wedge radargram. Thicknesses and depth are
/// fractions of the image height; impedances are unitless analogs.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeSpec {
    pub width: usize,
    pub height: usize,
    pub top_depth: f64,
    pub left_thickness: f64,
    pub right_thickness: f64,
    pub z_top: f64,
    pub z_wedge: f64,
    pub z_bottom: f64,
    /// cycles per unit time
    pub wavelet_freq: f64,
    /// time per sample
    pub dt: f64,
    pub seed: u64,
}

impl WedgeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.height < 2 {
            return Err(Error::InvalidArgument(format!(
                "wedge grid must be at least 1x2, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.top_depth > 0.0 && self.top_depth < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "top_depth must be in (0,1), got {}",
                self.top_depth
            )));
        }
        if self.left_thickness < 0.0 || self.right_thickness < 0.0 {
            return Err(Error::InvalidArgument("thicknesses must be >= 0".into()));
        }
        if self.z_top <= 0.0 || self.z_wedge <= 0.0 || self.z_bottom <= 0.0 {
            return Err(Error::InvalidArgument("impedances must be > 0".into()));
        }
        if self.wavelet_freq * self.dt >= 0.5 {
            return Err(Error::InvalidArgument(format!(
                "freq*dt = {} aliases (must be < 0.5)",
                self.wavelet_freq * self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Vertical,
    Horizontal,
    Diagonal,
}

/// Parameters for additive stripe artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct StripNoiseSpec {
    pub orientation: Orientation,
    /// degrees from horizontal; diagonal only
    pub angle: f64,
    pub stripe_count: usize,
    pub stripe_width: usize,
    /// fraction of the 0..255 dynamic range
    pub amplitude: f64,
    pub seed: u64,
}

impl StripNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.amplitude) {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be in [0,1], got {}",
                self.amplitude
            )));
        }
        if self.stripe_width < 1 {
            return Err(Error::InvalidArgument("stripe_width must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ricker wavelet w(t) = (1 - 2 pi^2 f^2 t^2) exp(-pi^2 f^2 t^2), sampled
/// at t = dt*(i - n/2). `n_samples` must be odd so the peak is centered.
pub fn ricker(freq: f64, dt: f64, n_samples: usize) -> Result<Vec<f64>> {
    if n_samples % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "ricker length must be odd, got {n_samples}"
        )));
    }
    if freq * dt >= 0.5 {
        return Err(Error::InvalidArgument(format!(
            "freq*dt = {} aliases (must be < 0.5)",
            freq * dt
        )));
    }
    let half = (n_samples / 2) as isize;
    let pf = std::f64::consts::PI * freq;
    Ok((0..n_samples)
        .map(|i| {
            let t = dt * (i as isize - half) as f64;
            let a = pf * pf * t * t;
            (1.0 - 2.0 * a) * (-a).exp()
        })
        .collect())
}

/// Reflection coefficients r[i] = (z[i+1]-z[i])/(z[i+1]+z[i]).
pub fn reflectivity(impedance_column: &[f64]) -> Result<Vec<f64>> {
    if impedance_column.iter().any(|z| *z <= 0.0) {
        return Err(Error::InvalidArgument("impedances must be > 0".into()));
    }
    Ok(impedance_column
        .windows(2)
        .map(|w| (w[1] - w[0]) / (w[1] + w[0]))
        .collect())
}

/// "Same"-length convolution with an odd, centered kernel; zero outside.
pub fn convolve_same(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    assert!(kernel.len() % 2 == 1, "kernel must be odd-length");
    let half = (kernel.len() / 2) as isize;
    let n = signal.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                let s = i + (j as isize - half);
                if s >= 0 && s < n {
                    acc += k * signal[s as usize];
                }
            }
            acc
        })
        .collect()
}

/// Impedance column for trace `j` of the wedge model.
pub fn impedance_column(spec: &WedgeSpec, trace: usize) -> Vec<f64> {
    let h = spec.height;
    let frac = if spec.width <= 1 {
        0.0
    } else {
        trace as f64 / (spec.width - 1) as f64
    };
    let thickness = spec.left_thickness + (spec.right_thickness - spec.left_thickness) * frac;
    let top = ((spec.top_depth * h as f64).round() as usize).min(h - 1);
    let bottom = (top + (thickness * h as f64).round() as usize).min(h);
    (0..h)
        .map(|r| {
            if r < top {
                spec.z_top
            } else if r < bottom {
                spec.z_wedge
            } else {
                spec.z_bottom
            }
        })
        .collect()
}

/// Wavelet length for a spec: odd, covering the envelope's support,
/// capped at twice the trace length.
pub fn wavelet_len(spec: &WedgeSpec) -> usize {
    let radius = (1.2 / (spec.wavelet_freq * spec.dt)).ceil() as usize;
    let n = 2 * radius.max(1) + 1;
    n.min(2 * spec.height + 1) | 1
}

/// Render the wedge model to a grayscale radargram. Deterministic.
pub fn synthesize(spec: &WedgeSpec) -> Result<GrayImage> {
    spec.validate()?;
    let kernel = ricker(spec.wavelet_freq, spec.dt, wavelet_len(spec))?;
    let h = spec.height;
    let w = spec.width;
    // reflectivity r[i] sits at the interface below row i; convolving the
    // length-h series (last entry 0) keeps the trace aligned with rows
    let mut values = vec![0.0f32; h * w];
    for j in 0..w {
        let col = impedance_column(spec, j);
        let r = reflectivity(&col)?;
        let mut series = vec![0.0f64; h];
        series[..h - 1].copy_from_slice(&r);
        let trace = convolve_same(&series, &kernel);
        for (i, v) in trace.iter().enumerate() {
            values[i * w + j] = *v as f32;
        }
    }
    let grid = RadarGrid::new(h, w, values)?;
    to_grayscale(&grid, ScaleMode::Linear)
}

/// Add `amplitude*255` inside each randomly placed stripe band, clamped
/// to [0,255]. Deterministic given the spec's seed.
pub fn inject_strip_noise(image: &GrayImage, spec: &StripNoiseSpec) -> Result<GrayImage> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let add = spec.amplitude * 255.0;
    let (rows, cols) = (image.rows, image.cols);
    let mut boost = vec![false; rows * cols];
    for _ in 0..spec.stripe_count {
        match spec.orientation {
            Orientation::Vertical => {
                let max_x = cols.saturating_sub(spec.stripe_width);
                let x0 = if max_x == 0 { 0 } else { rng.random_range(0..=max_x) };
                for r in 0..rows {
                    for x in x0..(x0 + spec.stripe_width).min(cols) {
                        boost[r * cols + x] = true;
                    }
                }
            }
            Orientation::Horizontal => {
                let max_y = rows.saturating_sub(spec.stripe_width);
                let y0 = if max_y == 0 { 0 } else { rng.random_range(0..=max_y) };
                for y in y0..(y0 + spec.stripe_width).min(rows) {
                    for c in 0..cols {
                        boost[y * cols + c] = true;
                    }
                }
            }
            Orientation::Diagonal => {
                let theta = spec.angle.to_radians();
                let (sin, cos) = (theta.sin(), theta.cos());
                // signed distance of (r,c) to a line at this angle
                let d = |r: f64, c: f64| c * sin - r * cos;
                let corners = [
                    d(0.0, 0.0),
                    d(0.0, (cols - 1) as f64),
                    d((rows - 1) as f64, 0.0),
                    d((rows - 1) as f64, (cols - 1) as f64),
                ];
                let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let offset = rng.random_range(lo..=hi);
                let half = spec.stripe_width as f64 / 2.0;
                for r in 0..rows {
                    for c in 0..cols {
                        if (d(r as f64, c as f64) - offset).abs() <= half {
                            boost[r * cols + c] = true;
                        }
                    }
                }
            }
        }
    }
    let pixels = image
        .pixels
        .iter()
        .zip(&boost)
        .map(|(p, b)| {
            if *b {
                (*p as f64 + add).round().clamp(0.0, 255.0) as u8
            } else {
                *p
            }
        })
        .collect();
    GrayImage::new(rows, cols, pixels)
}

/// Per-field sampling bounds for [`WedgeSpec`]. The defaults are guesses
/// tuned for visual similarity to typical wedge sections.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationRanges {
    pub width: (usize, usize),
    pub height: (usize, usize),
    pub top_depth: (f64, f64),
    pub left_thickness: (f64, f64),
    pub right_thickness: (f64, f64),
    pub z_top: (f64, f64),
    pub z_wedge: (f64, f64),
    pub z_bottom: (f64, f64),
    pub wavelet_freq: (f64, f64),
    pub dt: (f64, f64),
}

impl RandomizationRanges {
    pub fn with_size(width: usize, height: usize) -> Self {
        RandomizationRanges {
            width: (width, width),
            height: (height, height),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn ordered(name: &str, lo: f64, hi: f64) -> Result<()> {
            if lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "{name} range has min {lo} > max {hi}"
                )));
            }
            Ok(())
        }
        if self.width.0 > self.width.1 || self.height.0 > self.height.1 {
            return Err(Error::InvalidArgument("size range has min > max".into()));
        }
        if self.width.0 < 1 || self.height.0 < 2 {
            return Err(Error::InvalidArgument("sampled grids must be >= 1x2".into()));
        }
        ordered("top_depth", self.top_depth.0, self.top_depth.1)?;
        ordered("left_thickness", self.left_thickness.0, self.left_thickness.1)?;
        ordered("right_thickness", self.right_thickness.0, self.right_thickness.1)?;
        ordered("z_top", self.z_top.0, self.z_top.1)?;
        ordered("z_wedge", self.z_wedge.0, self.z_wedge.1)?;
        ordered("z_bottom", self.z_bottom.0, self.z_bottom.1)?;
        ordered("wavelet_freq", self.wavelet_freq.0, self.wavelet_freq.1)?;
        ordered("dt", self.dt.0, self.dt.1)?;
        if !(self.top_depth.0 > 0.0 && self.top_depth.1 < 1.0) {
            return Err(Error::InvalidArgument("top_depth bounds must stay in (0,1)".into()));
        }
        if self.left_thickness.0 < 0.0 || self.right_thickness.0 < 0.0 {
            return Err(Error::InvalidArgument("thickness bounds must be >= 0".into()));
        }
        if self.z_top.0 <= 0.0 || self.z_wedge.0 <= 0.0 || self.z_bottom.0 <= 0.0 {
            return Err(Error::InvalidArgument("impedance bounds must be > 0".into()));
        }
        if self.wavelet_freq.1 * self.dt.1 >= 0.5 {
            return Err(Error::InvalidArgument(
                "wavelet_freq*dt upper bounds alias (must be < 0.5)".into(),
            ));
        }
        Ok(())
    }
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        RandomizationRanges {
            width: (400, 400),
            height: (100, 100),
            top_depth: (0.15, 0.45),
            left_thickness: (0.0, 0.1),
            right_thickness: (0.15, 0.4),
            z_top: (1.0, 3.0),
            z_wedge: (3.5, 8.0),
            z_bottom: (1.5, 3.2),
            wavelet_freq: (0.05, 0.12),
            dt: (1.0, 1.0),
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Uniformly sample a valid spec from the ranges.
pub fn sample_spec(ranges: &RandomizationRanges, rng: &mut impl Rng) -> Result<WedgeSpec> {
    ranges.validate()?;
    fn sample_size<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }
    let spec = WedgeSpec {
        width: sample_size(rng, ranges.width),
        height: sample_size(rng, ranges.height),
        top_depth: uniform(rng, ranges.top_depth),
        left_thickness: uniform(rng, ranges.left_thickness),
        right_thickness: uniform(rng, ranges.right_thickness),
        z_top: uniform(rng, ranges.z_top),
        z_wedge: uniform(rng, ranges.z_wedge),
        z_bottom: uniform(rng, ranges.z_bottom),
        wavelet_freq: uniform(rng, ranges.wavelet_freq),
        dt: uniform(rng, ranges.dt),
        seed: rng.random(),
    };
    spec.validate()?;
    Ok(spec)
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub filename: String,
    pub domain: String,
    pub seed: u64,
}

/// In-memory corpus: clean wedge images plus stripe-injected surrogates.
/// Pure function of the arguments.
pub fn generate_corpus_images(
    ranges: &RandomizationRanges,
    n_clean: usize,
    n_noisy: usize,
    seed: u64,
) -> Result<(Vec<(GrayImage, u64)>, Vec<(GrayImage, u64)>)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut clean = Vec::with_capacity(n_clean);
    for _ in 0..n_clean {
        let spec = sample_spec(ranges, &mut rng)?;
        clean.push((synthesize(&spec)?, spec.seed));
    }
    let mut noisy = Vec::with_capacity(n_noisy);
    for i in 0..n_noisy {
        let spec = sample_spec(ranges, &mut rng)?;
        let base = synthesize(&spec)?;
        let orientation = match i % 3 {
            0 => Orientation::Vertical,
            1 => Orientation::Horizontal,
            _ => Orientation::Diagonal,
        };
        let noise = StripNoiseSpec {
            orientation,
            angle: rng.random_range(20.0..70.0),
            stripe_count: rng.random_range(1..=4),
            stripe_width: rng.random_range(1..=3),
            amplitude: rng.random_range(0.2..0.5),
            seed: rng.random(),
        };
        noisy.push((inject_strip_noise(&base, &noise)?, noise.seed));
    }
    Ok((clean, noisy))
}

/// Write a corpus to disk: PNGs plus `manifest.tsv`.
pub fn generate_corpus(
    ranges: &RandomizationRanges,
    n_clean: usize,
    n_noisy: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<CorpusEntry>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (clean, noisy) = generate_corpus_images(ranges, n_clean, n_noisy, seed)?;
    let mut entries = Vec::new();
    for (i, (img, s)) in clean.iter().enumerate() {
        let filename = format!("clean_{i:04}.png");
        img.save_png(&out_dir.join(&filename))?;
        entries.push(CorpusEntry {
            filename,
            domain: "clean".into(),
            seed: *s,
        });
    }
    for (i, (img, s)) in noisy.iter().enumerate() {
        let filename = format!("noisy_{i:04}.png");
        img.save_png(&out_dir.join(&filename))?;
        entries.push(CorpusEntry {
            filename,
            domain: "noisy".into(),
            seed: *s,
        });
    }
    let manifest = out_dir.join("manifest.tsv");
    let mut f = fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
    for e in &entries {
        writeln!(f, "{}\t{}\t{}", e.filename, e.domain, e.seed)
            .map_err(|err| Error::io(&manifest, err))?;
    }
    Ok(entries)
}
