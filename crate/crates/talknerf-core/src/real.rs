//! Scalar abstraction: training runs in f32, verification in f64.
//!
//! Every numeric code path in this crate is generic over [`Real`] so the
//! finite-difference harness exercises the exact same code in double
//! precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

pub trait Real:
    Float
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Serialize as an f32 bit pattern (checkpoint wire format).
    fn to_f32_bits(self) -> u32 {
        (self.as_f64() as f32).to_bits()
    }
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Numerically safe softplus: `ln(1 + e^x)`.
pub fn softplus<T: Real>(x: T) -> T {
    // max(x, 0) + ln(1 + e^-|x|) avoids overflow for large |x|.
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Derivative of softplus, i.e. the logistic sigmoid.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Derivative of sigmoid given its output `s`.
pub fn sigmoid_grad_from_output<T: Real>(s: T) -> T {
    s * (T::one() - s)
}

/// Dot product over equal-length slices.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + *x * *y;
    }
    acc
}

/// y += alpha * x
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * *xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_tails() {
        assert!((softplus(0.0f64) - 2.0f64.ln()).abs() < 1e-15);
        assert!((softplus(40.0f64) - 40.0).abs() < 1e-12);
        assert!(softplus(-40.0f64) > 0.0);
        assert!(softplus(-40.0f64) < 1e-15);
    }

    #[test]
    fn sigmoid_symmetry() {
        for &x in &[-5.0f64, -0.3, 0.0, 1.7, 9.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}
