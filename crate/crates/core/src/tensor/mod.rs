//! Dense N-D tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is an immutable row-major buffer plus shape. Operations on
//! tensors that require gradients record a backward closure and keep
//! references to their inputs, forming a DAG; [`Tensor::backward`] replays
//! the recorded operations in reverse topological order (see
//! [`autodiff::ComputationTape`]) and accumulates `d(loss)/d(leaf)` into
//! every tracked leaf. Buffers are never mutated after construction except
//! for gradient accumulation, so tensors are freely shareable.

mod conv;
mod io;
mod linalg;
mod ops;
mod resample;
mod shape_ops;

pub mod autodiff;

pub use conv::Conv2dSpec;
pub use resample::GridSample;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::scalar::Scalar;

/// Errors raised by tensor construction and operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TensorError {
    /// Data length does not match the product of the dimensions.
    LengthMismatch { shape: Vec<usize>, len: usize },
    /// Two operand shapes cannot be combined under trailing-dimension
    /// broadcasting.
    NotBroadcastable { lhs: Vec<usize>, rhs: Vec<usize> },
    /// An operation received a shape it cannot handle.
    ShapeMismatch { op: &'static str, detail: String },
    /// `backward` was called on a tensor that is not a scalar.
    NonScalarLoss { shape: Vec<usize> },
    /// Convolution/pooling geometry produced a nonpositive output size.
    InvalidGeometry { op: &'static str, detail: String },
    /// Save/load failure.
    Io(String),
}

impl std::fmt::Display for TensorError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TensorError::LengthMismatch { shape, len } => {
                write!(f, "data of length {len} does not fill shape {shape:?}")
            }
            TensorError::NotBroadcastable { lhs, rhs } => {
                write!(f, "shapes {lhs:?} and {rhs:?} are not broadcastable")
            }
            TensorError::ShapeMismatch { op, detail } => write!(f, "{op}: {detail}"),
            TensorError::NonScalarLoss { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            TensorError::InvalidGeometry { op, detail } => write!(f, "{op}: {detail}"),
            TensorError::Io(msg) => write!(f, "tensor io: {msg}"),
        }
    }
}

impl std::error::Error for TensorError {}

pub type Result<T> = std::result::Result<T, TensorError>;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static NO_GRAD: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

/// Runs `f` with gradient recording disabled on this thread. Operations
/// executed inside produce plain constants, which makes inference passes
/// cheap and keeps evaluation from touching any tape.
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    let prev = NO_GRAD.with(|c| c.replace(true));
    let out = f();
    NO_GRAD.with(|c| c.set(prev));
    out
}

fn grad_enabled() -> bool {
    NO_GRAD.with(|c| !c.get())
}

/// Backward closure of one recorded operation: receives `d(loss)/d(output)`
/// and the operation inputs, returns one optional gradient per input (in
/// the input's own shape).
pub(crate) type BackwardFn<S> =
    Box<dyn Fn(&[S], &[Tensor<S>]) -> Vec<Option<Vec<S>>> + Send + Sync>;

pub(crate) struct Inner<S: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: Arc<Vec<S>>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<S>>>,
    parents: Vec<Tensor<S>>,
    backward_fn: Option<BackwardFn<S>>,
}

impl<S: Scalar> Drop for Inner<S> {
    fn drop(&mut self) {
        // Unlink the DAG iteratively; deep op chains would otherwise
        // overflow the stack through recursive drops.
        let mut stack = std::mem::take(&mut self.parents);
        while let Some(mut t) = stack.pop() {
            if let Some(inner) = Arc::get_mut(&mut t.inner) {
                stack.append(&mut inner.parents);
            }
        }
    }
}

/// Dense tensor handle; cloning is cheap (reference counted).
pub struct Tensor<S: Scalar> {
    pub(crate) inner: Arc<Inner<S>>,
}

impl<S: Scalar> Clone for Tensor<S> {
    fn clone(&self) -> Self {
        Tensor { inner: Arc::clone(&self.inner) }
    }
}

impl<S: Scalar> std::fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor(id={}, shape={:?}, requires_grad={})",
            self.inner.id,
            self.inner.shape,
            self.inner.requires_grad
        )
    }
}

impl<S: Scalar> Tensor<S> {
    fn new_inner(
        shape: Vec<usize>,
        data: Arc<Vec<S>>,
        requires_grad: bool,
        parents: Vec<Tensor<S>>,
        backward_fn: Option<BackwardFn<S>>,
    ) -> Self {
        Tensor {
            inner: Arc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                requires_grad,
                grad: Mutex::new(None),
                parents,
                backward_fn,
            }),
        }
    }

    /// Untracked tensor from raw data.
    pub fn from_vec(shape: impl Into<Vec<usize>>, data: Vec<S>) -> Result<Self> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::LengthMismatch { shape, len: data.len() });
        }
        Ok(Self::new_inner(shape, Arc::new(data), false, Vec::new(), None))
    }

    /// Tracked leaf (e.g. a network weight): gradients accumulate here.
    pub fn param(shape: impl Into<Vec<usize>>, data: Vec<S>) -> Result<Self> {
        Ok(Self::from_vec(shape, data)?.requires_grad_leaf())
    }

    /// Marks an untracked leaf as requiring gradients.
    pub fn requires_grad_leaf(self) -> Self {
        if self.inner.requires_grad {
            return self;
        }
        Self::new_inner(
            self.inner.shape.clone(),
            Arc::clone(&self.inner.data),
            grad_enabled(),
            Vec::new(),
            None,
        )
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Self::new_inner(shape, Arc::new(vec![S::zero(); n]), false, Vec::new(), None)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: S) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Self::new_inner(shape, Arc::new(vec![value; n]), false, Vec::new(), None)
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, S::one())
    }

    pub fn scalar(value: S) -> Self {
        Self::new_inner(vec![1], Arc::new(vec![value]), false, Vec::new(), None)
    }

    /// Result of a differentiable operation. The output is tracked when any
    /// input is tracked and recording is enabled; otherwise it is a plain
    /// constant and the closure is dropped.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<S>,
        parents: Vec<Tensor<S>>,
        backward_fn: BackwardFn<S>,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let tracked = grad_enabled() && parents.iter().any(|p| p.inner.requires_grad);
        if tracked {
            Self::new_inner(shape, Arc::new(data), true, parents, Some(backward_fn))
        } else {
            Self::new_inner(shape, Arc::new(data), false, Vec::new(), None)
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.inner.data
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> S {
        assert_eq!(self.numel(), 1, "item() requires exactly one element");
        self.inner.data[0]
    }

    /// Copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<S>> {
        self.inner.grad.lock().expect("grad lock").clone()
    }

    /// Clears the accumulated gradient.
    pub fn zero_grad(&self) {
        *self.inner.grad.lock().expect("grad lock") = None;
    }

    pub(crate) fn accumulate_grad_owned(&self, delta: Vec<S>) {
        let mut slot = self.inner.grad.lock().expect("grad lock");
        match slot.as_mut() {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(&delta) {
                    *gi += *di;
                }
            }
            None => *slot = Some(delta),
        }
    }

    pub(crate) fn parents(&self) -> &[Tensor<S>] {
        &self.inner.parents
    }

    pub(crate) fn backward_fn(&self) -> Option<&BackwardFn<S>> {
        self.inner.backward_fn.as_ref()
    }

    /// Same values, cut loose from the graph: no parents, no gradient.
    pub fn detach(&self) -> Tensor<S> {
        Self::new_inner(
            self.inner.shape.clone(),
            Arc::clone(&self.inner.data),
            false,
            Vec::new(),
            None,
        )
    }

    /// Reverse-mode differentiation from a scalar loss. Every reachable leaf
    /// with `requires_grad` receives `d(loss)/d(leaf)`; calling `backward`
    /// again without [`Tensor::zero_grad`] accumulates on top.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss { shape: self.inner.shape.to_vec() });
        }
        let tape = autodiff::ComputationTape::trace(self);
        tape.replay_reverse();
        Ok(())
    }
}

/// Row-major strides for a shape.
pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        let err = Tensor::<f64>::from_vec(vec![2, 3], vec![1.0; 5]).unwrap_err();
        assert!(matches!(err, TensorError::LengthMismatch { .. }));
    }

    #[test]
    fn constructors_fill_values() {
        let z = Tensor::<f64>::zeros(vec![2, 2]);
        assert_eq!(z.data(), &[0.0; 4]);
        let o = Tensor::<f32>::ones(vec![3]);
        assert_eq!(o.data(), &[1.0f32; 3]);
        assert_eq!(Tensor::<f64>::scalar(4.5).item(), 4.5);
    }

    #[test]
    fn detach_shares_data_without_tracking() {
        let a = Tensor::param(vec![2], vec![1.0f64, 2.0]).unwrap();
        let d = a.detach();
        assert!(!d.requires_grad());
        assert_eq!(d.data(), a.data());
    }

    #[test]
    fn deep_graph_drops_without_stack_overflow() {
        let mut t = Tensor::param(vec![4], vec![1.0f64; 4]).unwrap();
        for _ in 0..200_000 {
            t = t.add_scalar(1.0);
        }
        drop(t);
    }

    #[test]
    fn no_grad_suppresses_tracking() {
        let a = Tensor::param(vec![2], vec![1.0f64, 2.0]).unwrap();
        let out = no_grad(|| a.mul_scalar(3.0));
        assert!(!out.requires_grad());
        let tracked = a.mul_scalar(3.0);
        assert!(tracked.requires_grad());
    }
}
