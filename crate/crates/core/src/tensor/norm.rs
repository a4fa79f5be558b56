//! Instance and batch normalization with affine parameters.
//!
//! Both kinds use the population variance. Instance norm reduces over
//! (H,W) per sample per channel; batch norm reduces over (B,H,W) per
//! channel. `batch_norm_infer` normalizes with fixed running statistics.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn check_norm_shapes<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(usize, usize, usize, usize)> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "normalization expects [B,C,H,W], got {:?}",
            s
        )));
    }
    let c = s[1];
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::ShapeMismatch(format!(
            "gamma/beta shapes {:?}/{:?} do not match {} channels",
            gamma.shape(),
            beta.shape(),
            c
        )));
    }
    if eps <= T::zero() {
        return Err(Error::InvalidArgument("eps must be > 0".into()));
    }
    Ok((s[0], c, s[2], s[3]))
}

/// Normalize a set of groups (each a list of index ranges into x) and wire
/// the standard normalization backward. `group_of(b,c)` maps each (b,c)
/// slab to its statistics group.
fn norm_impl<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
    per_instance: bool,
) -> Tensor<T> {
    let s = x.shape();
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let hw = h * w;
    let xd = x.to_vec();
    let gd = gamma.to_vec();
    let bd = beta.to_vec();

    let n_groups = if per_instance { b * c } else { c };
    let group_len = if per_instance { hw } else { b * hw };
    let inv_n = T::one() / T::from_f64(group_len as f64);

    // slab index -> group index
    let group_of = move |bi: usize, ci: usize| if per_instance { bi * c + ci } else { ci };

    let mut mean = vec![T::zero(); n_groups];
    let mut var = vec![T::zero(); n_groups];
    for bi in 0..b {
        for ci in 0..c {
            let g = group_of(bi, ci);
            let slab = &xd[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];
            let mut acc = T::zero();
            for v in slab {
                acc += *v;
            }
            mean[g] += acc;
        }
    }
    for m in mean.iter_mut() {
        *m *= inv_n;
    }
    for bi in 0..b {
        for ci in 0..c {
            let g = group_of(bi, ci);
            let slab = &xd[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];
            let mu = mean[g];
            let mut acc = T::zero();
            for v in slab {
                let d = *v - mu;
                acc += d * d;
            }
            var[g] += acc;
        }
    }
    for v in var.iter_mut() {
        *v *= inv_n;
    }

    let invstd: Vec<T> = var.iter().map(|v| (*v + eps).sqrt().recip()).collect();

    let mut xhat = vec![T::zero(); xd.len()];
    let mut out = vec![T::zero(); xd.len()];
    for bi in 0..b {
        for ci in 0..c {
            let g = group_of(bi, ci);
            let base = (bi * c + ci) * hw;
            let (mu, is) = (mean[g], invstd[g]);
            for i in 0..hw {
                let xh = (xd[base + i] - mu) * is;
                xhat[base + i] = xh;
                out[base + i] = gd[ci] * xh + bd[ci];
            }
        }
    }

    let gd_back = gd.clone();
    Tensor::from_op(
        s.to_vec(),
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |gy, slots| {
            // per-group reductions of gy and gy*xhat
            let mut sum_g = vec![T::zero(); n_groups];
            let mut sum_gx = vec![T::zero(); n_groups];
            for bi in 0..b {
                for ci in 0..c {
                    let g = group_of(bi, ci);
                    let base = (bi * c + ci) * hw;
                    let mut a0 = T::zero();
                    let mut a1 = T::zero();
                    for i in 0..hw {
                        a0 += gy[base + i];
                        a1 += gy[base + i] * xhat[base + i];
                    }
                    sum_g[g] += a0;
                    sum_gx[g] += a1;
                }
            }
            if let Some(gx) = slots[0].as_mut() {
                for bi in 0..b {
                    for ci in 0..c {
                        let g = group_of(bi, ci);
                        let base = (bi * c + ci) * hw;
                        let k = gd_back[ci] * invstd[g];
                        let mg = sum_g[g] * inv_n;
                        let mgx = sum_gx[g] * inv_n;
                        for i in 0..hw {
                            gx[base + i] += k * (gy[base + i] - mg - xhat[base + i] * mgx);
                        }
                    }
                }
            }
            if let Some(gg) = slots[1].as_mut() {
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        let mut acc = T::zero();
                        for i in 0..hw {
                            acc += gy[base + i] * xhat[base + i];
                        }
                        gg[ci] += acc;
                    }
                }
            }
            if let Some(gb) = slots[2].as_mut() {
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        let mut acc = T::zero();
                        for i in 0..hw {
                            acc += gy[base + i];
                        }
                        gb[ci] += acc;
                    }
                }
            }
        }),
    )
}

/// Instance normalization over (H,W) per sample per channel.
pub fn instance_norm<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>> {
    check_norm_shapes(x, gamma, beta, eps)?;
    Ok(norm_impl(x, gamma, beta, eps, true))
}

/// Batch normalization over (B,H,W) per channel using batch statistics.
/// Also returns the batch mean and variance so callers can maintain
/// running statistics.
pub fn batch_norm_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let (b, c, h, w) = check_norm_shapes(x, gamma, beta, eps)?;
    let out = norm_impl(x, gamma, beta, eps, false);
    // recompute the per-channel stats for the running averages
    let hw = h * w;
    let inv_n = T::one() / T::from_f64((b * hw) as f64);
    let xd = x.data();
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    for bi in 0..b {
        for ci in 0..c {
            let slab = &xd[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];
            let mut acc = T::zero();
            for v in slab {
                acc += *v;
            }
            mean[ci] += acc;
        }
    }
    for m in mean.iter_mut() {
        *m *= inv_n;
    }
    for bi in 0..b {
        for ci in 0..c {
            let slab = &xd[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];
            let mut acc = T::zero();
            for v in slab {
                let d = *v - mean[ci];
                acc += d * d;
            }
            var[ci] += acc;
        }
    }
    for v in var.iter_mut() {
        *v *= inv_n;
    }
    Ok((out, mean, var))
}

/// Batch normalization in inference mode: fixed running statistics act as
/// constants, so the backward is a plain per-channel affine map.
pub fn batch_norm_infer<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &[T],
    running_var: &[T],
    eps: T,
) -> Result<Tensor<T>> {
    let (b, c, h, w) = check_norm_shapes(x, gamma, beta, eps)?;
    if running_mean.len() != c || running_var.len() != c {
        return Err(Error::ShapeMismatch(format!(
            "running stats length {}/{} do not match {} channels",
            running_mean.len(),
            running_var.len(),
            c
        )));
    }
    let hw = h * w;
    let invstd: Vec<T> = running_var.iter().map(|v| (*v + eps).sqrt().recip()).collect();
    let gd = gamma.to_vec();
    let bd = beta.to_vec();
    let xd = x.to_vec();
    let mut out = vec![T::zero(); xd.len()];
    let mut xhat = vec![T::zero(); xd.len()];
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * hw;
            for i in 0..hw {
                let xh = (xd[base + i] - running_mean[ci]) * invstd[ci];
                xhat[base + i] = xh;
                out[base + i] = gd[ci] * xh + bd[ci];
            }
        }
    }
    let gd_back = gd.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |gy, slots| {
            if let Some(gx) = slots[0].as_mut() {
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        let k = gd_back[ci] * invstd[ci];
                        for i in 0..hw {
                            gx[base + i] += k * gy[base + i];
                        }
                    }
                }
            }
            if let Some(gg) = slots[1].as_mut() {
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        let mut acc = T::zero();
                        for i in 0..hw {
                            acc += gy[base + i] * xhat[base + i];
                        }
                        gg[ci] += acc;
                    }
                }
            }
            if let Some(gb) = slots[2].as_mut() {
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * hw;
                        let mut acc = T::zero();
                        for i in 0..hw {
                            acc += gy[base + i];
                        }
                        gb[ci] += acc;
                    }
                }
            }
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn instance_norm_reference_values() {
        // x = [1,2,3,4], mu = 2.5, sigma^2 = 1.25
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0f64, 2.0, 3.0, 4.0]);
        let gamma = Tensor::new(vec![1], vec![1.0]);
        let beta = Tensor::new(vec![1], vec![0.0]);
        let y = instance_norm(&x, &gamma, &beta, 1e-12).unwrap();
        let expected = [-1.3416, -0.4472, 0.4472, 1.3416];
        for (got, want) in y.to_vec().iter().zip(expected) {
            assert_relative_eq!(*got, want, epsilon = 1e-4);
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![7.0f64; 4]);
        let gamma = Tensor::new(vec![1], vec![1.0]);
        let beta = Tensor::new(vec![1], vec![0.0]);
        let y = instance_norm(&x, &gamma, &beta, 1e-5).unwrap();
        for v in y.to_vec() {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn zero_gamma_outputs_beta() {
        let x = Tensor::new(vec![1, 2, 2, 2], vec![1.0f64, -3.0, 2.0, 9.0, 0.5, 0.1, -4.0, 2.0]);
        let gamma = Tensor::new(vec![2], vec![0.0, 0.0]);
        let beta = Tensor::new(vec![2], vec![3.0, -1.5]);
        let y = instance_norm(&x, &gamma, &beta, 1e-5).unwrap();
        let v = y.to_vec();
        assert_eq!(&v[0..4], &[3.0; 4]);
        assert_eq!(&v[4..8], &[-1.5; 4]);
    }

    #[test]
    fn instance_norm_output_standardized() {
        let x = Tensor::new(
            vec![2, 2, 3, 3],
            (0..36).map(|i| (i as f64 * 0.7).sin() * 3.0 + 1.0).collect(),
        );
        let gamma = Tensor::new(vec![2], vec![1.0, 1.0]);
        let beta = Tensor::new(vec![2], vec![0.0, 0.0]);
        let eps = 1e-10;
        let y = instance_norm(&x, &gamma, &beta, eps).unwrap();
        let v = y.to_vec();
        for s in 0..4 {
            let slab = &v[s * 9..(s + 1) * 9];
            let mu: f64 = slab.iter().sum::<f64>() / 9.0;
            let var: f64 = slab.iter().map(|z| (z - mu).powi(2)).sum::<f64>() / 9.0;
            assert!(mu.abs() < 1e-6);
            assert_relative_eq!(var, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn batch_norm_stats_span_batch() {
        let x = Tensor::new(vec![2, 1, 1, 2], vec![0.0f64, 2.0, 4.0, 6.0]);
        let gamma = Tensor::new(vec![1], vec![1.0]);
        let beta = Tensor::new(vec![1], vec![0.0]);
        let (y, mean, var) = batch_norm_train(&x, &gamma, &beta, 1e-12).unwrap();
        assert_relative_eq!(mean[0], 3.0);
        assert_relative_eq!(var[0], 5.0);
        let v = y.to_vec();
        assert_relative_eq!(v[0], -3.0 / 5.0f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn infer_mode_uses_running_stats() {
        let x = Tensor::new(vec![1, 1, 1, 2], vec![1.0f64, 3.0]);
        let gamma = Tensor::new(vec![1], vec![2.0]);
        let beta = Tensor::new(vec![1], vec![1.0]);
        let y = batch_norm_infer(&x, &gamma, &beta, &[1.0], &[4.0], 1e-12).unwrap();
        let v = y.to_vec();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(v[1], 3.0, epsilon = 1e-6);
    }
}
