//! Named parameter tensors and gradient accumulation buffers.

use crate::error::{Error, Result};
use crate::real::Real;

/// A flat trainable tensor with its gradient buffer.
///
/// `id` is the position in the owning model's registration order; it indexes
/// [`GradSink`] buffers and fixes checkpoint layout.
#[derive(Debug, Clone)]
pub struct ParamTensor<T: Real> {
    pub id: usize,
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Real> ParamTensor<T> {
    pub fn new(id: usize, name: impl Into<String>, shape: Vec<usize>, values: Vec<T>) -> Self {
        let len: usize = shape.iter().product();
        assert_eq!(values.len(), len, "values must match shape product");
        Self {
            id,
            name: name.into(),
            shape,
            values,
            grad: vec![T::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    /// Error naming this tensor if any gradient entry is non-finite.
    pub fn check_grad_finite(&self) -> Result<()> {
        if self.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGrad(self.name.clone()));
        }
        Ok(())
    }
}

/// Issues sequential tensor ids during model construction.
#[derive(Debug, Default)]
pub struct ParamRegistry {
    next: usize,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn issue(&mut self) -> usize {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn count(&self) -> usize {
        self.next
    }
}

/// Per-worker gradient accumulator, indexed by tensor id.
#[derive(Debug, Clone)]
pub struct GradSink<T: Real> {
    bufs: Vec<Vec<T>>,
}

impl<T: Real> GradSink<T> {
    pub fn zeros_like(tensors: &[&ParamTensor<T>]) -> Self {
        let mut bufs = vec![Vec::new(); tensors.len()];
        for t in tensors {
            bufs[t.id] = vec![T::zero(); t.len()];
        }
        Self { bufs }
    }

    pub fn zero(&mut self) {
        for b in &mut self.bufs {
            b.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    #[inline]
    pub fn add(&mut self, id: usize, idx: usize, v: T) {
        self.bufs[id][idx] += v;
    }

    #[inline]
    pub fn buf_mut(&mut self, id: usize) -> &mut [T] {
        &mut self.bufs[id]
    }

    pub fn buf(&self, id: usize) -> &[T] {
        &self.bufs[id]
    }

    /// Elementwise add of `other`; callers merge sinks in ascending chunk
    /// order to keep reductions deterministic.
    pub fn merge_from(&mut self, other: &GradSink<T>) {
        assert_eq!(self.bufs.len(), other.bufs.len());
        for (dst, src) in self.bufs.iter_mut().zip(other.bufs.iter()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += *s;
            }
        }
    }

    /// Flush accumulated gradients into the tensors' `grad` fields.
    pub fn apply_to(&self, tensors: &mut [&mut ParamTensor<T>]) {
        for t in tensors.iter_mut() {
            let buf = &self.bufs[t.id];
            debug_assert_eq!(buf.len(), t.grad.len());
            for (g, s) in t.grad.iter_mut().zip(buf.iter()) {
                *g += *s;
            }
        }
    }
}
