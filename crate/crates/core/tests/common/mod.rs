//! Shared test oracles: central finite differences and randomized shapes.

#![allow(dead_code)]

pub mod gradsuite;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use resgan_core::tensor::Tensor;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform values in [lo, hi), kept away from zero by `dead_zone` so that
/// kinked activations (relu/abs) stay finite-difference friendly.
pub fn random_data(rng: &mut ChaCha12Rng, n: usize, lo: f64, hi: f64, dead_zone: f64) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let v: f64 = rng.random_range(lo..hi);
            if v.abs() >= dead_zone {
                break v;
            }
        })
        .collect()
}

/// Central finite-difference check of `loss_fn` against analytic gradients.
///
/// `loss_fn` must rebuild the graph from the given leaves on every call.
/// Returns the worst relative error seen.
pub fn gradient_check(
    shapes: &[Vec<usize>],
    datas: &[Vec<f64>],
    loss_fn: &dyn Fn(&[Tensor<f64>]) -> Tensor<f64>,
) -> f64 {
    let leaves: Vec<Tensor<f64>> = shapes
        .iter()
        .zip(datas)
        .map(|(s, d)| Tensor::param(s.clone(), d.clone()))
        .collect();
    let loss = loss_fn(&leaves);
    loss.backward().expect("backward failed in gradient check");
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.numel()]))
        .collect();

    let eval = |datas: &[Vec<f64>]| -> f64 {
        let leaves: Vec<Tensor<f64>> = shapes
            .iter()
            .zip(datas)
            .map(|(s, d)| Tensor::new(s.clone(), d.clone()))
            .collect();
        loss_fn(&leaves).item()
    };

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut work: Vec<Vec<f64>> = datas.to_vec();
    for (li, data) in datas.iter().enumerate() {
        for i in 0..data.len() {
            let orig = data[i];
            work[li][i] = orig + h;
            let fp = eval(&work);
            work[li][i] = orig - h;
            let fm = eval(&work);
            work[li][i] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[li][i];
            let denom = a.abs().max(numeric.abs()).max(1.0);
            let rel = (a - numeric).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}
