//! Elementwise operators, activations, and reductions.

use super::{axpy, Scalar, Tensor};
use crate::error::{Error, Result};

fn check_same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{op}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        check_same_shape(self, other, "add")?;
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| *a + *b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|g, out| {
                if let Some(ga) = &mut out[0] {
                    axpy(ga, g);
                }
                if let Some(gb) = &mut out[1] {
                    axpy(gb, g);
                }
            }),
        ))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        check_same_shape(self, other, "sub")?;
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| *a - *b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|g, out| {
                if let Some(ga) = &mut out[0] {
                    axpy(ga, g);
                }
                if let Some(gb) = &mut out[1] {
                    for (d, s) in gb.iter_mut().zip(g) {
                        *d -= *s;
                    }
                }
            }),
        ))
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        check_same_shape(self, other, "mul")?;
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| *a * *b)
            .collect();
        let a_vals = self.to_vec();
        let b_vals = other.to_vec();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for i in 0..g.len() {
                        ga[i] += g[i] * b_vals[i];
                    }
                }
                if let Some(gb) = &mut out[1] {
                    for i in 0..g.len() {
                        gb[i] += g[i] * a_vals[i];
                    }
                }
            }),
        ))
    }

    pub fn scale(&self, factor: T) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|a| *a * factor).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for (d, s) in ga.iter_mut().zip(g) {
                        *d += *s * factor;
                    }
                }
            }),
        )
    }

    pub fn add_scalar(&self, value: T) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|a| *a + value).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(|g, out| {
                if let Some(ga) = &mut out[0] {
                    axpy(ga, g);
                }
            }),
        )
    }

    pub fn square(&self) -> Tensor<T> {
        let vals = self.to_vec();
        let data: Vec<T> = vals.iter().map(|a| *a * *a).collect();
        let two = T::from_f64(2.0);
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for i in 0..g.len() {
                        ga[i] += two * vals[i] * g[i];
                    }
                }
            }),
        )
    }

    /// Elementwise |x|; subgradient at 0 is 0.
    pub fn abs(&self) -> Tensor<T> {
        let vals = self.to_vec();
        let data: Vec<T> = vals.iter().map(|a| a.abs()).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for i in 0..g.len() {
                        let s = if vals[i] > T::zero() {
                            T::one()
                        } else if vals[i] < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        ga[i] += s * g[i];
                    }
                }
            }),
        )
    }

    /// relu; derivative at exactly 0 is 0.
    pub fn relu(&self) -> Tensor<T> {
        let vals = self.to_vec();
        let data: Vec<T> = vals
            .iter()
            .map(|a| if *a > T::zero() { *a } else { T::zero() })
            .collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for i in 0..g.len() {
                        if vals[i] > T::zero() {
                            ga[i] += g[i];
                        }
                    }
                }
            }),
        )
    }

    pub fn leaky_relu(&self, slope: T) -> Tensor<T> {
        assert!(
            slope >= T::zero() && slope < T::one(),
            "leaky_relu slope must be in [0,1)"
        );
        let vals = self.to_vec();
        let data: Vec<T> = vals
            .iter()
            .map(|a| if *a > T::zero() { *a } else { *a * slope })
            .collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for i in 0..g.len() {
                        let k = if vals[i] > T::zero() { T::one() } else { slope };
                        ga[i] += k * g[i];
                    }
                }
            }),
        )
    }

    pub fn tanh_act(&self) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|a| a.tanh()).collect();
        let out_vals = data.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for i in 0..g.len() {
                        ga[i] += (T::one() - out_vals[i] * out_vals[i]) * g[i];
                    }
                }
            }),
        )
    }

    /// Full reduction to a scalar, fixed left-to-right summation order.
    pub fn sum(&self) -> Tensor<T> {
        let mut acc = T::zero();
        for v in self.data().iter() {
            acc += *v;
        }
        let n = self.numel();
        Tensor::from_op(
            vec![1],
            vec![acc],
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    for i in 0..n {
                        ga[i] += g[0];
                    }
                }
            }),
        )
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = self.numel();
        let inv = T::one() / T::from_f64(n as f64);
        let mut acc = T::zero();
        for v in self.data().iter() {
            acc += *v;
        }
        Tensor::from_op(
            vec![1],
            vec![acc * inv],
            vec![self.clone()],
            Box::new(move |g, out| {
                if let Some(ga) = &mut out[0] {
                    let gi = g[0] * inv;
                    for slot in ga.iter_mut() {
                        *slot += gi;
                    }
                }
            }),
        )
    }
}

/// Activation kinds used by the networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation<T: Scalar> {
    Relu,
    LeakyRelu(T),
    Tanh,
}

impl<T: Scalar> Activation<T> {
    pub fn apply(&self, x: &Tensor<T>) -> Tensor<T> {
        match self {
            Activation::Relu => x.relu(),
            Activation::LeakyRelu(slope) => x.leaky_relu(*slope),
            Activation::Tanh => x.tanh_act(),
        }
    }
}
