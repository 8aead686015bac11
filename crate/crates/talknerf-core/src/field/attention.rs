//! Softmax attention over the quadrature samples of one ray.
//!
//! The audio feature is the query (one per ray), sample positions are the
//! keys, point features the values. The softmax-pooled value vector is
//! broadcast back onto every sample through a residual:
//! `attended_i = v_i + sum_j alpha_j v_j`.

use crate::error::{Error, Result};
use crate::real::{axpy, dot, Real};

/// Forward pass over `m` samples with key width `d_k` and value width `d_v`.
/// `keys` is `m * d_k`, `vals` and `out` are `m * d_v`.
pub fn attend_forward<T: Real>(
    q: &[T],
    keys: &[T],
    vals: &[T],
    scale: T,
    alpha: &mut [T],
    pooled: &mut [T],
    out: &mut [T],
) -> Result<()> {
    let d_k = q.len();
    let d_v = pooled.len();
    let m = alpha.len();
    if m == 0 {
        return Err(Error::EmptyRay);
    }
    debug_assert_eq!(keys.len(), m * d_k);
    debug_assert_eq!(vals.len(), m * d_v);
    debug_assert_eq!(out.len(), m * d_v);

    // Stabilized softmax of scale * <q, k_i>.
    let mut max_logit = T::neg_infinity();
    for i in 0..m {
        let l = scale * dot(q, &keys[i * d_k..(i + 1) * d_k]);
        alpha[i] = l;
        if l > max_logit {
            max_logit = l;
        }
    }
    let mut denom = T::zero();
    for a in alpha.iter_mut() {
        *a = (*a - max_logit).exp();
        denom += *a;
    }
    for a in alpha.iter_mut() {
        *a /= denom;
    }

    pooled.iter_mut().for_each(|p| *p = T::zero());
    for i in 0..m {
        axpy(alpha[i], &vals[i * d_v..(i + 1) * d_v], pooled);
    }
    for i in 0..m {
        let dst = &mut out[i * d_v..(i + 1) * d_v];
        let v = &vals[i * d_v..(i + 1) * d_v];
        for k in 0..d_v {
            dst[k] = v[k] + pooled[k];
        }
    }
    Ok(())
}

/// Reverse pass; `d_out` is `m * d_v`. Gradients are written (not
/// accumulated) into `dq`, `d_keys`, `d_vals`.
#[allow(clippy::too_many_arguments)]
pub fn attend_backward<T: Real>(
    q: &[T],
    keys: &[T],
    vals: &[T],
    scale: T,
    alpha: &[T],
    d_out: &[T],
    dq: &mut [T],
    d_keys: &mut [T],
    d_vals: &mut [T],
) {
    let d_k = q.len();
    let d_v = d_vals.len() / alpha.len().max(1);
    let m = alpha.len();

    // g_sum = sum_j dOut_j reaches every v through the pooled broadcast.
    let mut g_sum = vec![T::zero(); d_v];
    for i in 0..m {
        axpy(T::one(), &d_out[i * d_v..(i + 1) * d_v], &mut g_sum);
    }

    // dv_i = dOut_i + alpha_i * g_sum; d_alpha_i = <g_sum, v_i>
    let mut d_alpha = vec![T::zero(); m];
    for i in 0..m {
        let dst = &mut d_vals[i * d_v..(i + 1) * d_v];
        let src = &d_out[i * d_v..(i + 1) * d_v];
        for k in 0..d_v {
            dst[k] = src[k] + alpha[i] * g_sum[k];
        }
        d_alpha[i] = dot(&g_sum, &vals[i * d_v..(i + 1) * d_v]);
    }

    // Softmax Jacobian: ds_i = alpha_i (d_alpha_i - sum_j alpha_j d_alpha_j)
    let mix = (0..m).map(|j| alpha[j] * d_alpha[j]).sum::<T>();
    dq.iter_mut().for_each(|v| *v = T::zero());
    for i in 0..m {
        let ds = alpha[i] * (d_alpha[i] - mix);
        let k_i = &keys[i * d_k..(i + 1) * d_k];
        axpy(scale * ds, k_i, dq);
        let dk = &mut d_keys[i * d_k..(i + 1) * d_k];
        for (dst, &qv) in dk.iter_mut().zip(q.iter()) {
            *dst = scale * ds * qv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ray_is_an_error() {
        let mut alpha: Vec<f64> = vec![];
        let mut pooled = vec![0.0; 2];
        let mut out: Vec<f64> = vec![];
        let err = attend_forward(&[1.0], &[], &[], 1.0, &mut alpha, &mut pooled, &mut out);
        assert!(err.is_err());
    }

    #[test]
    fn singleton_softmax_doubles_value() {
        // One sample: alpha = (1), attended = v + v = 2v.
        let q = [0.3f64, -0.7];
        let keys = [1.0, 2.0];
        let vals = [0.5, -1.5, 2.5];
        let mut alpha = [0.0];
        let mut pooled = [0.0; 3];
        let mut out = [0.0; 3];
        attend_forward(&q, &keys, &vals, 1.0, &mut alpha, &mut pooled, &mut out).unwrap();
        assert_eq!(alpha[0], 1.0);
        for (o, v) in out.iter().zip(vals.iter()) {
            assert!((o - 2.0 * v).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_logits_give_uniform_weights() {
        // q orthogonal to every key -> all logits zero -> alpha = 1/m.
        let q = [1.0f64, 0.0];
        let keys = [0.0, 1.0, 0.0, -2.0, 0.0, 0.5]; // m=3, all orthogonal to q
        let vals = [1.0, 0.0, 0.0, 1.0, -1.0, -1.0];
        let mut alpha = [0.0; 3];
        let mut pooled = [0.0; 2];
        let mut out = [0.0; 6];
        attend_forward(&q, &keys, &vals, 1.0, &mut alpha, &mut pooled, &mut out).unwrap();
        for a in alpha {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let q = [0.2, 0.9, -0.4];
        let keys: Vec<f64> = (0..12).map(|i| ((i * 7 + 3) % 11) as f64 * 0.1 - 0.5).collect();
        let vals: Vec<f64> = (0..8).map(|i| (i as f64) * 0.25 - 1.0).collect();
        let mut alpha = [0.0; 4];
        let mut pooled = [0.0; 2];
        let mut out = [0.0; 8];
        attend_forward(&q, &keys, &vals, 0.7, &mut alpha, &mut pooled, &mut out).unwrap();
        let s: f64 = alpha.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(alpha.iter().all(|a| *a >= 0.0));
    }

    #[test]
    fn two_sample_golden_case() {
        // Independent evaluation of the full rule for m=2 seeded inputs.
        let q = [0.5, -0.25];
        let keys = [0.2, 0.4, -0.6, 0.1];
        let vals = [1.0, 2.0, -1.0, 0.5];
        let scale = 1.0;

        let l0 = 0.5 * 0.2 + (-0.25) * 0.4; // 0.0
        let l1 = 0.5 * (-0.6) + (-0.25) * 0.1; // -0.325
        let e0 = (l0 as f64).exp();
        let e1 = (l1 as f64).exp();
        let a0 = e0 / (e0 + e1);
        let a1 = e1 / (e0 + e1);
        let g = [a0 * 1.0 + a1 * (-1.0), a0 * 2.0 + a1 * 0.5];
        let want = [1.0 + g[0], 2.0 + g[1], -1.0 + g[0], 0.5 + g[1]];

        let mut alpha = [0.0; 2];
        let mut pooled = [0.0; 2];
        let mut out = [0.0; 4];
        attend_forward(&q, &keys, &vals, scale, &mut alpha, &mut pooled, &mut out).unwrap();
        assert!((alpha[0] - a0).abs() < 1e-15);
        assert!((alpha[1] - a1).abs() < 1e-15);
        for (o, w) in out.iter().zip(want.iter()) {
            assert!((o - w).abs() < 1e-15, "{o} vs {w}");
        }
    }

    #[test]
    fn permutation_equivariance() {
        let q = [0.3, 0.8];
        let keys = [0.1, 0.2, -0.5, 0.7, 0.9, -0.1];
        let vals = [1.0, -2.0, 0.5, 0.25, -0.75, 3.0];
        let run = |ks: &[f64], vs: &[f64]| {
            let mut alpha = [0.0; 3];
            let mut pooled = [0.0; 2];
            let mut out = [0.0; 6];
            attend_forward(&q, ks, vs, 0.5, &mut alpha, &mut pooled, &mut out).unwrap();
            out
        };
        let base = run(&keys, &vals);
        // Swap samples 0 and 2.
        let keys_p = [0.9, -0.1, -0.5, 0.7, 0.1, 0.2];
        let vals_p = [-0.75, 3.0, 0.5, 0.25, 1.0, -2.0];
        let perm = run(&keys_p, &vals_p);
        for k in 0..2 {
            assert!((base[k] - perm[4 + k]).abs() < 1e-14);
            assert!((base[4 + k] - perm[k]).abs() < 1e-14);
            assert!((base[2 + k] - perm[2 + k]).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let m = 4;
        let (dk, dv) = (3, 2);
        let q0: Vec<f64> = vec![0.4, -0.2, 0.7];
        let keys0: Vec<f64> = (0..m * dk).map(|i| ((i * 5 + 1) % 7) as f64 * 0.2 - 0.6).collect();
        let vals0: Vec<f64> = (0..m * dv).map(|i| ((i * 3 + 2) % 5) as f64 * 0.3 - 0.5).collect();
        let r: Vec<f64> = (0..m * dv).map(|i| (i as f64) * 0.1 - 0.35).collect();
        let scale = 0.6;

        let loss = |q: &[f64], keys: &[f64], vals: &[f64]| -> f64 {
            let mut alpha = vec![0.0; m];
            let mut pooled = vec![0.0; dv];
            let mut out = vec![0.0; m * dv];
            attend_forward(q, keys, vals, scale, &mut alpha, &mut pooled, &mut out).unwrap();
            out.iter().zip(r.iter()).map(|(a, b)| a * b).sum()
        };

        let mut alpha = vec![0.0; m];
        let mut pooled = vec![0.0; dv];
        let mut out = vec![0.0; m * dv];
        attend_forward(&q0, &keys0, &vals0, scale, &mut alpha, &mut pooled, &mut out).unwrap();
        let mut dq = vec![0.0; dk];
        let mut dkeys = vec![0.0; m * dk];
        let mut dvals = vec![0.0; m * dv];
        attend_backward(&q0, &keys0, &vals0, scale, &alpha, &r, &mut dq, &mut dkeys, &mut dvals);

        let eps = 1e-6;
        let check = |ana: f64, num: f64, what: &str| {
            assert!((ana - num).abs() < 1e-8, "{what}: {ana} vs {num}");
        };
        for i in 0..dk {
            let mut qp = q0.clone();
            qp[i] += eps;
            let mut qm = q0.clone();
            qm[i] -= eps;
            check(dq[i], (loss(&qp, &keys0, &vals0) - loss(&qm, &keys0, &vals0)) / (2.0 * eps), "dq");
        }
        for i in 0..m * dk {
            let mut kp = keys0.clone();
            kp[i] += eps;
            let mut km = keys0.clone();
            km[i] -= eps;
            check(dkeys[i], (loss(&q0, &kp, &vals0) - loss(&q0, &km, &vals0)) / (2.0 * eps), "dk");
        }
        for i in 0..m * dv {
            let mut vp = vals0.clone();
            vp[i] += eps;
            let mut vm = vals0.clone();
            vm[i] -= eps;
            check(dvals[i], (loss(&q0, &keys0, &vp) - loss(&q0, &keys0, &vm)) / (2.0 * eps), "dv");
        }
    }
}
