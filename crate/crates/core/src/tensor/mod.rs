//! Reverse-mode autodiff tensor core.
//!
//! Tensors are reference-counted nodes in an implicit computation graph.
//! Each non-leaf node keeps its parents plus a backward closure that maps
//! the incoming gradient to per-parent gradients. Calling [`Tensor::backward`]
//! on a scalar walks the graph in reverse topological order and accumulates
//! gradients on every leaf that requires them.
//!
//! A graph is confined to one thread during forward/backward; tensors are
//! value-like otherwise. All reductions run in a fixed order so identical
//! seeds give bit-identical results within one build.

mod adam;
mod conv;
mod matmul;
mod norm;
mod ops;

pub use adam::{adam_step, Adam, AdamHyper, AdamState};
pub use conv::{conv2d, conv_transpose2d, PadKind, PadSpec};
pub use norm::{batch_norm_infer, batch_norm_train, instance_norm};
pub use ops::Activation;

use std::cell::{Cell, Ref, RefCell};
use std::collections::HashMap;
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::rc::Rc;

use crate::error::{Error, Result};

/// Floating-point element type for tensors. Training runs in `f32`;
/// gradient-check tests use `f64` for tight tolerances.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + Debug + Display + Sum + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Backward closure: incoming gradient, pre-allocated per-parent slots.
/// A slot is `Some(zeros)` when that parent needs a gradient and `None`
/// otherwise; the closure accumulates into the `Some` slots.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T], &mut [Option<Vec<T>>])>;

struct Inner<T: Scalar> {
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    requires_grad: Cell<bool>,
    grad: RefCell<Option<Vec<T>>>,
    parents: Vec<Tensor<T>>,
    backward: Option<BackwardFn<T>>,
}

/// N-dimensional array participating in the autodiff graph.
/// Layout convention for 4-D data is (batch, channel, height, width), row-major.
pub struct Tensor<T: Scalar = f32> {
    inner: Rc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad.get())
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Self {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "element count {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data: RefCell::new(data),
                requires_grad: Cell::new(false),
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward: None,
            }),
        }
    }

    /// Leaf tensor that accumulates gradients (a trainable parameter).
    pub fn param(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Self {
        let t = Tensor::new(shape, data);
        t.inner.requires_grad.set(true);
        t
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Tensor::new(shape, vec![T::zero(); n])
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Tensor::new(shape, vec![value; n])
    }

    pub fn scalar(value: T) -> Self {
        Tensor::new(vec![1], vec![value])
    }

    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        parents: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        let needs = parents.iter().any(|p| p.requires_grad());
        if !needs {
            return Tensor::new(shape, data);
        }
        let numel: usize = shape.iter().product();
        assert_eq!(numel, data.len());
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data: RefCell::new(data),
                requires_grad: Cell::new(true),
                grad: RefCell::new(None),
                parents,
                backward: Some(backward),
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad.get()
    }

    /// Toggle gradient tracking on a leaf (used to freeze discriminators
    /// during generator updates).
    pub fn set_requires_grad(&self, value: bool) {
        assert!(
            self.inner.backward.is_none(),
            "requires_grad can only be toggled on leaves"
        );
        self.inner.requires_grad.set(value);
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Overwrite leaf data in place (optimizer updates).
    pub fn set_data(&self, data: Vec<T>) {
        assert_eq!(data.len(), self.numel());
        *self.inner.data.borrow_mut() = data;
    }

    /// Copy of the values as a fresh leaf outside the graph.
    pub fn detach(&self) -> Tensor<T> {
        Tensor::new(self.inner.shape.clone(), self.to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    fn key(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate on leaves
    /// with `requires_grad`; repeated calls without zeroing add up.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        // Post-order DFS over parents; reversing gives every consumer
        // before its producers.
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut visited: HashMap<usize, ()> = HashMap::new();
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.key(), ());
        while let Some((node, idx)) = stack.pop() {
            if idx < node.inner.parents.len() {
                let parent = node.inner.parents[idx].clone();
                stack.push((node, idx + 1));
                if parent.requires_grad() && !visited.contains_key(&parent.key()) {
                    visited.insert(parent.key(), ());
                    stack.push((parent, 0));
                }
            } else {
                order.push(node);
            }
        }

        let mut grads: HashMap<usize, Vec<T>> = HashMap::new();
        grads.insert(self.key(), vec![T::one()]);

        for node in order.iter().rev() {
            let gout = match grads.remove(&node.key()) {
                Some(g) => g,
                None => continue,
            };
            if node.inner.backward.is_none() {
                if node.requires_grad() {
                    let mut slot = node.inner.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => axpy(acc, &gout),
                        None => *slot = Some(gout),
                    }
                }
                continue;
            }
            let f = node.inner.backward.as_ref().unwrap();
            let mut slots: Vec<Option<Vec<T>>> = node
                .inner
                .parents
                .iter()
                .map(|p| {
                    if p.requires_grad() {
                        Some(vec![T::zero(); p.numel()])
                    } else {
                        None
                    }
                })
                .collect();
            f(&gout, &mut slots);
            for (parent, slot) in node.inner.parents.iter().zip(slots) {
                if let Some(pg) = slot {
                    match grads.get_mut(&parent.key()) {
                        Some(acc) => axpy(acc, &pg),
                        None => {
                            grads.insert(parent.key(), pg);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn axpy<T: Scalar>(dst: &mut [T], src: &[T]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

/// Stack single-image tensors [1,C,H,W] into one batch [B,C,H,W] leaf.
pub fn stack_batch<T: Scalar>(items: &[Tensor<T>]) -> Result<Tensor<T>> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("stack_batch of empty list".into()));
    }
    let first = items[0].shape().to_vec();
    if first.len() != 4 || first[0] != 1 {
        return Err(Error::ShapeMismatch(format!(
            "stack_batch expects [1,C,H,W] items, got {:?}",
            first
        )));
    }
    let mut data = Vec::with_capacity(items.len() * items[0].numel());
    for item in items {
        if item.shape() != first.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "stack_batch item shape {:?} != {:?}",
                item.shape(),
                first
            )));
        }
        data.extend_from_slice(&item.data());
    }
    let shape = vec![items.len(), first[1], first[2], first[3]];
    Ok(Tensor::new(shape, data))
}

/// Split a batch tensor [B,C,H,W] into B detached [1,C,H,W] leaves.
pub fn split_batch<T: Scalar>(batch: &Tensor<T>) -> Vec<Tensor<T>> {
    let shape = batch.shape();
    assert_eq!(shape.len(), 4, "split_batch expects a 4-D tensor");
    let per = shape[1] * shape[2] * shape[3];
    let data = batch.data();
    (0..shape[0])
        .map(|b| {
            Tensor::new(
                vec![1, shape[1], shape[2], shape[3]],
                data[b * per..(b + 1) * per].to_vec(),
            )
        })
        .collect()
}
