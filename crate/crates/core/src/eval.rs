//! Quantitative evaluation: full-cycle translation distortion measured
//! as MSE/PSNR per record, with an acceptance band on the MSE.
//!
//! Convention: MSE is computed on [0,1]-normalized pixels while PSNR
//! uses peak 255, i.e. psnr = 10*log10(255^2 / mse). The two scales are
//! deliberately mixed; it is the convention the reported dB figures
//! follow, so it is kept and documented rather than normalized away.

use crate::error::{Error, Result};
use crate::gan::CycleGanModel;
use crate::ingest::{crop_at, from_model_output, pad_to_multiple, to_model_input, GrayImage};

/// Acceptable per-record MSE range (exclusive bounds).
pub const MSE_BAND: (f64, f64) = (0.01, 0.1);

/// Mean squared error over [0,1]-normalized pixels.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::ShapeMismatch(format!(
            "mse over {}x{} vs {}x{} images",
            a.cols, a.rows, b.cols, b.rows
        )));
    }
    let n = a.pixels.len() as f64;
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| {
            let d = x as f64 / 255.0 - y as f64 / 255.0;
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// Peak signal-to-noise ratio in dB; +infinity for a zero MSE.
pub fn psnr(mse: f64) -> Result<f64> {
    if mse < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "mse must be non-negative, got {mse}"
        )));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

pub struct FullCycle {
    /// F(noisy) rendered to pixels.
    pub clean_translation: GrayImage,
    /// G(F(noisy)) rendered to pixels.
    pub reconstruction: GrayImage,
}

/// Translate a noisy image to the clean domain and back. Inputs whose
/// extents are not multiples of 4 are mirror-padded for the generators
/// and cropped back, so outputs always match the input size.
pub fn full_cycle(model: &CycleGanModel, noisy: &GrayImage) -> Result<FullCycle> {
    model.set_training(false);
    let padded = pad_to_multiple(noisy, 4);
    let x = to_model_input(&padded);
    let clean_t = model.f.forward(&x)?;
    let rec_t = model.g.forward(&clean_t)?;
    let clean_full = from_model_output(&clean_t.detach())?;
    let rec_full = from_model_output(&rec_t.detach())?;
    Ok(FullCycle {
        clean_translation: crop_at(&clean_full, 0, 0, noisy.cols, noisy.rows)?,
        reconstruction: crop_at(&rec_full, 0, 0, noisy.cols, noisy.rows)?,
    })
}

/// One-way translation through a single generator with the same
/// pad-and-crop rule as [`full_cycle`].
pub fn translate_image(
    generator: &crate::gan::Generator,
    image: &GrayImage,
) -> Result<GrayImage> {
    let padded = pad_to_multiple(image, 4);
    let out = generator.forward(&to_model_input(&padded))?;
    crop_at(&from_model_output(&out.detach())?, 0, 0, image.cols, image.rows)
}

#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub record: String,
    pub mse: f64,
    pub psnr: f64,
    pub within_band: bool,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub average_mse: f64,
    pub average_psnr: f64,
    /// True iff every row's MSE is strictly inside [`MSE_BAND`].
    pub all_within_band: bool,
}

impl MetricsReport {
    pub fn from_rows(rows: Vec<MetricsRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "metrics report needs at least one row".into(),
            ));
        }
        let n = rows.len() as f64;
        let average_mse = rows.iter().map(|r| r.mse).sum::<f64>() / n;
        let average_psnr = rows.iter().map(|r| r.psnr).sum::<f64>() / n;
        let all_within_band = rows.iter().all(|r| r.within_band);
        Ok(MetricsReport {
            rows,
            average_mse,
            average_psnr,
            all_within_band,
        })
    }

    /// Column-aligned text table with a final Average row.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>29} {:>31}\n",
            "Record", "Mean-Square-Error (grayscale)", "Peak Signal-to-Noise Ratio (dB)"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>29.3} {:>31.3}\n",
                r.record, r.mse, r.psnr
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>29.3} {:>31.3}\n",
            "Average", self.average_mse, self.average_psnr
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("record,mse,psnr,within_band\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.record, r.mse, r.psnr, r.within_band
            ));
        }
        out
    }
}

pub fn within_band(mse: f64) -> bool {
    mse > MSE_BAND.0 && mse < MSE_BAND.1
}

/// Full-cycle metrics for each (record id, noisy image) pair.
pub fn evaluate(model: &CycleGanModel, corpus: &[(String, GrayImage)]) -> Result<MetricsReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument(
            "evaluation corpus must be non-empty".into(),
        ));
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for (record, image) in corpus {
        let cycle = full_cycle(model, image)?;
        let m = mse(image, &cycle.reconstruction)?;
        rows.push(MetricsRow {
            record: record.clone(),
            mse: m,
            psnr: psnr(m)?,
            within_band: within_band(m),
        });
    }
    MetricsReport::from_rows(rows)
}

/// Among per-epoch reports, the band-satisfying epoch with the lowest
/// average MSE, if any.
pub fn select_best_epoch(reports: &[(u32, MetricsReport)]) -> Option<u32> {
    reports
        .iter()
        .filter(|(_, r)| within_band(r.average_mse))
        .min_by(|a, b| a.1.average_mse.total_cmp(&b.1.average_mse))
        .map(|(e, _)| *e)
}

/// Side-by-side composite (original | translated) with a thin separator.
pub fn composite(original: &GrayImage, translated: &GrayImage) -> Result<GrayImage> {
    if original.rows != translated.rows {
        return Err(Error::ShapeMismatch(format!(
            "composite of {}-row and {}-row images",
            original.rows, translated.rows
        )));
    }
    const SEP: usize = 2;
    let cols = original.cols + SEP + translated.cols;
    let mut pixels = Vec::with_capacity(original.rows * cols);
    for r in 0..original.rows {
        pixels.extend_from_slice(
            &original.pixels[r * original.cols..(r + 1) * original.cols],
        );
        pixels.extend_from_slice(&[255; SEP]);
        pixels.extend_from_slice(
            &translated.pixels[r * translated.cols..(r + 1) * translated.cols],
        );
    }
    GrayImage::new(original.rows, cols, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::{CycleGanModel, DiscriminatorConfig, GeneratorConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn image(rows: usize, cols: usize, f: impl Fn(usize) -> u8) -> GrayImage {
        GrayImage::new(rows, cols, (0..rows * cols).map(f).collect()).unwrap()
    }

    fn tiny_model(seed: u64) -> CycleGanModel {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        CycleGanModel::new(
            GeneratorConfig {
                base_filters: 4,
                n_res_blocks: 1,
                ..GeneratorConfig::default()
            },
            DiscriminatorConfig {
                base_filters: 4,
                ..DiscriminatorConfig::default()
            },
            10.0,
            0.0,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = image(2, 2, |_| 0);
        let b = image(2, 2, |_| 255);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        let half = image(2, 2, |i| if i < 2 { 255 } else { 0 });
        let zero = image(2, 2, |_| 0);
        assert_eq!(mse(&half, &zero).unwrap(), 0.5);
    }

    #[test]
    fn mse_is_symmetric_and_checks_dimensions() {
        let a = image(3, 4, |i| (i * 17 % 256) as u8);
        let b = image(3, 4, |i| (i * 31 % 256) as u8);
        assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        let c = image(4, 3, |_| 0);
        assert!(mse(&a, &c).is_err());
    }

    #[test]
    fn psnr_examples_and_band_endpoints() {
        assert!((psnr(0.049).unwrap() - 61.262).abs() < 0.05);
        assert!((psnr(0.01).unwrap() - 68.13).abs() < 0.005);
        assert!((psnr(0.1).unwrap() - 58.13).abs() < 0.005);
        assert!(psnr(0.0).unwrap().is_infinite());
        assert!(psnr(-0.1).is_err());
        // exact 10 dB gap across the band (log law)
        assert!((psnr(0.01).unwrap() - psnr(0.1).unwrap() - 10.0).abs() < 1e-12);
        // strictly decreasing
        assert!(psnr(0.02).unwrap() > psnr(0.03).unwrap());
    }

    #[test]
    fn full_cycle_preserves_non_multiple_of_4_dimensions() {
        let model = tiny_model(1);
        let img = image(13, 27, |i| (i % 251) as u8);
        let out = full_cycle(&model, &img).unwrap();
        assert_eq!(
            (out.clean_translation.rows, out.clean_translation.cols),
            (13, 27)
        );
        assert_eq!((out.reconstruction.rows, out.reconstruction.cols), (13, 27));
    }

    #[test]
    fn untrained_full_cycle_mse_is_reproducible() {
        let img = image(16, 16, |i| (i * 13 % 256) as u8);
        let a = mse(&img, &full_cycle(&tiny_model(2), &img).unwrap().reconstruction).unwrap();
        let b = mse(&img, &full_cycle(&tiny_model(2), &img).unwrap().reconstruction).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a.is_finite());
    }

    #[test]
    fn report_averages_equal_recomputed_means() {
        let rows = vec![
            MetricsRow {
                record: "a".into(),
                mse: 0.01,
                psnr: psnr(0.01).unwrap(),
                within_band: within_band(0.01),
            },
            MetricsRow {
                record: "b".into(),
                mse: 0.1,
                psnr: psnr(0.1).unwrap(),
                within_band: within_band(0.1),
            },
        ];
        let report = MetricsReport::from_rows(rows.clone()).unwrap();
        assert!((report.average_mse - 0.055).abs() < 1e-15);
        let mean_psnr = (rows[0].psnr + rows[1].psnr) / 2.0;
        assert_eq!(report.average_psnr, mean_psnr);
        // band endpoints are excluded
        assert!(!rows[0].within_band && !rows[1].within_band);
        assert!(!report.all_within_band);
    }

    #[test]
    fn single_row_report_equals_its_row() {
        let row = MetricsRow {
            record: "only".into(),
            mse: 0.049,
            psnr: psnr(0.049).unwrap(),
            within_band: within_band(0.049),
        };
        let report = MetricsReport::from_rows(vec![row.clone()]).unwrap();
        assert_eq!(report.average_mse, row.mse);
        assert_eq!(report.average_psnr, row.psnr);
        assert!(report.all_within_band);
    }

    #[test]
    fn table_and_csv_have_expected_shape() {
        let report = MetricsReport::from_rows(vec![MetricsRow {
            record: "rec1".into(),
            mse: 0.049,
            psnr: 61.23,
            within_band: true,
        }])
        .unwrap();
        let table = report.to_text_table();
        assert!(table.contains("Mean-Square-Error (grayscale)"));
        assert!(table.contains("Peak Signal-to-Noise Ratio (dB)"));
        assert!(table.lines().last().unwrap().starts_with("Average"));
        let csv = report.to_csv();
        assert!(csv.starts_with("record,mse,psnr,within_band\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn best_epoch_selection_requires_the_band() {
        let mk = |mse_v: f64| {
            MetricsReport::from_rows(vec![MetricsRow {
                record: "r".into(),
                mse: mse_v,
                psnr: psnr(mse_v).unwrap(),
                within_band: within_band(mse_v),
            }])
            .unwrap()
        };
        let reports = vec![(5, mk(0.005)), (10, mk(0.03)), (15, mk(0.02))];
        assert_eq!(select_best_epoch(&reports), Some(15));
        let none = vec![(5, mk(0.5))];
        assert_eq!(select_best_epoch(&none), None);
    }

    #[test]
    fn composite_places_images_side_by_side() {
        let a = image(2, 3, |_| 10);
        let b = image(2, 2, |_| 20);
        let c = composite(&a, &b).unwrap();
        assert_eq!((c.rows, c.cols), (2, 7));
        assert_eq!(&c.pixels[0..3], &[10, 10, 10]);
        assert_eq!(&c.pixels[3..5], &[255, 255]);
        assert_eq!(&c.pixels[5..7], &[20, 20]);
    }
}
