//! Bias-corrected Adam.

use crate::error::Result;
use crate::real::Real;

use super::tensor::ParamTensor;

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers for one tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T: Real> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step_count: 0,
        }
    }
}

/// One Adam update on `param` from its `grad` field; grads are zeroed after.
pub fn adam_step<T: Real>(
    param: &mut ParamTensor<T>,
    state: &mut AdamState<T>,
    hyper: &AdamHyper,
) -> Result<()> {
    debug_assert!(hyper.lr > 0.0 && hyper.eps > 0.0);
    debug_assert!(0.0 < hyper.beta1 && hyper.beta1 < 1.0);
    debug_assert!(0.0 < hyper.beta2 && hyper.beta2 < 1.0);
    assert_eq!(state.m.len(), param.len(), "adam state length mismatch");

    param.check_grad_finite()?;

    state.step_count += 1;
    let t = state.step_count as i32;
    let b1 = T::from_f64(hyper.beta1);
    let b2 = T::from_f64(hyper.beta2);
    let one = T::one();
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);
    let lr = T::from_f64(hyper.lr);
    let eps = T::from_f64(hyper.eps);

    for i in 0..param.values.len() {
        let g = param.grad[i];
        let m = b1 * state.m[i] + (one - b1) * g;
        let v = b2 * state.v[i] + (one - b2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        param.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        param.grad[i] = T::zero();
    }
    debug_assert!(param.values.iter().all(|v| v.is_finite()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(vals: Vec<f64>) -> ParamTensor<f64> {
        ParamTensor::new(0, "p", vec![vals.len()], vals)
    }

    #[test]
    fn zero_grad_is_noop_on_values() {
        let mut p = param(vec![0.3, -1.2, 7.0]);
        let mut st = AdamState::zeros(3);
        let h = AdamHyper::default();
        for _ in 0..5 {
            adam_step(&mut p, &mut st, &h).unwrap();
        }
        assert_eq!(p.values, vec![0.3, -1.2, 7.0]);
        assert_eq!(st.step_count, 5);
    }

    #[test]
    fn first_step_matches_closed_form() {
        // p=0, g=1, lr=0.1, betas (0.9, 0.999), eps 1e-8:
        // m_hat=1, v_hat=1 => p1 = -0.1/(1+1e-8)
        let mut p = param(vec![0.0]);
        p.grad[0] = 1.0;
        let mut st = AdamState::zeros(1);
        let h = AdamHyper {
            lr: 0.1,
            ..AdamHyper::default()
        };
        adam_step(&mut p, &mut st, &h).unwrap();
        assert!((p.values[0] - (-0.09999999900000009)).abs() < 1e-15);
        assert_eq!(p.grad[0], 0.0);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn constant_gradient_decreases_monotonically() {
        let mut p = param(vec![0.0]);
        let mut st = AdamState::zeros(1);
        let h = AdamHyper {
            lr: 0.1,
            ..AdamHyper::default()
        };
        p.grad[0] = 1.0;
        adam_step(&mut p, &mut st, &h).unwrap();
        let p1 = p.values[0];
        p.grad[0] = 1.0;
        adam_step(&mut p, &mut st, &h).unwrap();
        let p2 = p.values[0];
        assert!(p1 < 0.0);
        assert!(p2 < p1, "second step must keep descending: {p2} vs {p1}");
        // Independently evaluated two-step recurrence.
        assert!((p2 - (-0.19999999799999946)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_grad_errors_and_leaves_values() {
        let mut p = param(vec![1.0]);
        p.grad[0] = f64::INFINITY;
        let mut st = AdamState::zeros(1);
        let before = p.values.clone();
        let err = adam_step(&mut p, &mut st, &AdamHyper::default());
        assert!(err.is_err());
        assert_eq!(p.values, before);
        assert_eq!(st.step_count, 0);
    }
}
