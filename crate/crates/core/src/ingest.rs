//! Raw RES grid ingestion and image preparation.
//!
//! Raw grids travel in the RG1 container: magic `RGRD`, little-endian
//! u32 version = 1, u32 rows, u32 cols, then rows*cols little-endian
//! 32-bit IEEE-754 floats, row-major. Images are 8-bit single-channel
//! PNGs. Scaling to 0..255 is min-max per grid (round-half-up), with a
//! log10 mode for echo strengths spanning orders of magnitude.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const RG1_MAGIC: &[u8; 4] = b"RGRD";
pub const RG1_VERSION: u32 = 1;

/// Raw 2-D echo-strength samples: rows are fast-time/depth, cols are traces.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarGrid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

impl RadarGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid dimensions must be >= 1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not fill a {rows}x{cols} grid",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid contains non-finite values".into(),
            ));
        }
        Ok(RadarGrid { rows, cols, values })
    }
}

/// 8-bit single-channel image; the interchange unit between pipeline stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels do not fill a {rows}x{cols} image",
                pixels.len()
            )));
        }
        Ok(GrayImage { rows, cols, pixels })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_raw(self.cols as u32, self.rows as u32, self.pixels.clone())
            .expect("pixel count matches dimensions");
        img.save(path).map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            )
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::parse(path, e.to_string()))?
            .into_luma8();
        GrayImage::new(img.height() as usize, img.width() as usize, img.into_raw())
    }
}

/// Read an RG1 file.
pub fn read_rgrid(path: &Path) -> Result<RadarGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_rgrid(&bytes, path)
}

fn parse_rgrid(bytes: &[u8], path: &Path) -> Result<RadarGrid> {
    if bytes.len() < 16 {
        return Err(Error::parse(
            path,
            format!("header needs 16 bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != RG1_MAGIC {
        return Err(Error::parse(
            path,
            format!("bad magic {:?}, expected \"RGRD\"", &bytes[0..4]),
        ));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != RG1_VERSION {
        return Err(Error::parse(
            path,
            format!("unsupported version {version}, expected {RG1_VERSION}"),
        ));
    }
    let rows = u32_at(8) as usize;
    let cols = u32_at(12) as usize;
    let expected = 16 + rows * cols * 4;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            format!(
                "truncated payload: expected {expected} bytes, got {}",
                bytes.len()
            ),
        ));
    }
    let values: Vec<f32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::parse(path, "grid contains non-finite values"));
    }
    RadarGrid::new(rows, cols, values)
}

/// Write an RG1 file (bit-exact inverse of [`read_rgrid`]).
pub fn write_rgrid(grid: &RadarGrid, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(16 + grid.values.len() * 4);
    out.extend_from_slice(RG1_MAGIC);
    out.extend_from_slice(&RG1_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.rows as u32).to_le_bytes());
    out.extend_from_slice(&(grid.cols as u32).to_le_bytes());
    for v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    Linear,
    /// log10 applied before the min-max map; `offset` is added first and
    /// the shifted values must all be positive.
    Log {
        offset: f64,
    },
}

pub fn round_half_up(x: f64) -> u8 {
    let r = (x + 0.5).floor();
    r.clamp(0.0, 255.0) as u8
}

/// Min-max scale a grid to 0..255. A constant grid maps to mid-gray 128.
pub fn to_grayscale(grid: &RadarGrid, mode: ScaleMode) -> Result<GrayImage> {
    let transformed = transform_values(grid, mode)?;
    let (min, max) = min_max(&transformed);
    scale_to_image(grid, &transformed, min, max)
}

/// Same as [`to_grayscale`] but with a caller-supplied range (per-dataset
/// scaling across several grids).
pub fn to_grayscale_with_range(
    grid: &RadarGrid,
    mode: ScaleMode,
    min: f64,
    max: f64,
) -> Result<GrayImage> {
    let transformed = transform_values(grid, mode)?;
    scale_to_image(grid, &transformed, min, max)
}

/// Min and max of the (mode-transformed) values across a set of grids.
pub fn dataset_range(grids: &[RadarGrid], mode: ScaleMode) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for g in grids {
        let t = transform_values(g, mode)?;
        let (a, b) = min_max(&t);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}

fn transform_values(grid: &RadarGrid, mode: ScaleMode) -> Result<Vec<f64>> {
    match mode {
        ScaleMode::Linear => Ok(grid.values.iter().map(|v| *v as f64).collect()),
        ScaleMode::Log { offset } => {
            let mut out = Vec::with_capacity(grid.values.len());
            for v in &grid.values {
                let shifted = *v as f64 + offset;
                if shifted <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "log mode requires positive values; got {v} with offset {offset}"
                    )));
                }
                out.push(shifted.log10());
            }
            Ok(out)
        }
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

fn scale_to_image(grid: &RadarGrid, values: &[f64], min: f64, max: f64) -> Result<GrayImage> {
    let pixels = if max > min {
        let inv = 255.0 / (max - min);
        values.iter().map(|v| round_half_up((v - min) * inv)).collect()
    } else {
        vec![128u8; values.len()]
    };
    GrayImage::new(grid.rows, grid.cols, pixels)
}

/// Contiguous crop at a uniformly random offset; no rescaling.
pub fn random_crop(
    image: &GrayImage,
    crop_w: usize,
    crop_h: usize,
    rng: &mut impl Rng,
) -> Result<GrayImage> {
    if crop_w == 0 || crop_h == 0 || crop_w > image.cols || crop_h > image.rows {
        return Err(Error::InvalidArgument(format!(
            "crop {crop_w}x{crop_h} does not fit in {}x{} image",
            image.cols, image.rows
        )));
    }
    let max_x = image.cols - crop_w;
    let max_y = image.rows - crop_h;
    let x = if max_x == 0 { 0 } else { rng.random_range(0..=max_x) };
    let y = if max_y == 0 { 0 } else { rng.random_range(0..=max_y) };
    crop_at(image, x, y, crop_w, crop_h)
}

pub fn crop_at(
    image: &GrayImage,
    x: usize,
    y: usize,
    crop_w: usize,
    crop_h: usize,
) -> Result<GrayImage> {
    if x + crop_w > image.cols || y + crop_h > image.rows {
        return Err(Error::InvalidArgument("crop out of bounds".into()));
    }
    let mut pixels = Vec::with_capacity(crop_w * crop_h);
    for r in 0..crop_h {
        let base = (y + r) * image.cols + x;
        pixels.extend_from_slice(&image.pixels[base..base + crop_w]);
    }
    GrayImage::new(crop_h, crop_w, pixels)
}

/// Map pixels to the generators' [-1,1] range: p -> 2*(p/255) - 1.
pub fn to_model_input(image: &GrayImage) -> Tensor<f32> {
    let data: Vec<f32> = image
        .pixels
        .iter()
        .map(|p| 2.0 * (*p as f32 / 255.0) - 1.0)
        .collect();
    Tensor::new(vec![1, 1, image.rows, image.cols], data)
}

/// Inverse of [`to_model_input`]: clamp to [-1,1], map back with
/// round-half-up. Exact round trip on all 256 pixel values.
pub fn from_model_output(t: &Tensor<f32>) -> Result<GrayImage> {
    let s = t.shape();
    if s.len() != 4 || s[0] != 1 || s[1] != 1 {
        return Err(Error::ShapeMismatch(format!(
            "expected [1,1,H,W] model output, got {:?}",
            s
        )));
    }
    let pixels: Vec<u8> = t
        .data()
        .iter()
        .map(|v| {
            let c = (*v as f64).clamp(-1.0, 1.0);
            round_half_up(255.0 * (c + 1.0) / 2.0)
        })
        .collect();
    GrayImage::new(s[2], s[3], pixels)
}

/// Mirror-pad (edge-inclusive) an image on the bottom/right up to the next
/// multiples of `multiple`, so any size fits the generator.
pub fn pad_to_multiple(image: &GrayImage, multiple: usize) -> GrayImage {
    let rows = image.rows.div_ceil(multiple) * multiple;
    let cols = image.cols.div_ceil(multiple) * multiple;
    if rows == image.rows && cols == image.cols {
        return image.clone();
    }
    let mirror = |i: usize, n: usize| {
        let period = 2 * n;
        let j = i % period;
        if j < n {
            j
        } else {
            period - 1 - j
        }
    };
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let sr = mirror(r, image.rows);
        for c in 0..cols {
            let sc = mirror(c, image.cols);
            pixels.push(image.pixels[sr * image.cols + sc]);
        }
    }
    GrayImage {
        rows,
        cols,
        pixels,
    }
}
