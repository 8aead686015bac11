//! Parameter storage, hand-derived reverse-mode gradients, Adam updates,
//! and the finite-difference verification harness.
//!
//! There is no general tape: each layer ships a forward that records the
//! intermediates its backward needs, and backward accumulates into a
//! [`GradSink`] indexed by tensor id. Chunked ray batches each own a sink;
//! sinks are merged in ascending chunk order so results are bit-identical
//! at any thread count.

pub mod adam;
pub mod gradcheck;
pub mod mlp;
pub mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use gradcheck::{gradcheck_fn, GradCheckFailure, GradCheckReport, GradCheckSettings};
pub use mlp::{Linear, Mlp, Proj};
pub use tensor::{GradSink, ParamRegistry, ParamTensor};
