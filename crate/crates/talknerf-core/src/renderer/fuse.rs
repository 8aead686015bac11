//! Per-sample spatial fusion of the mouth and face branch outputs.
//!
//! Densities add; colors blend weighted by density so the fused color stays
//! in [0,1]. Exact-zero densities short-circuit to the other branch so a
//! disabled branch leaves renders bit-identical to a single-branch pass.

use crate::real::Real;

pub const EPS_FUSE: f64 = 1e-8;

/// Fused (sigma, color) of branch outputs (s1, c1) and (s2, c2).
pub fn fuse_point<T: Real>(s1: T, c1: [T; 3], s2: T, c2: [T; 3]) -> (T, [T; 3]) {
    debug_assert!(s1 >= T::zero() && s2 >= T::zero());
    let zero = T::zero();
    let half = T::from_f64(0.5);
    if s1 == zero && s2 == zero {
        return (
            zero,
            [
                (c1[0] + c2[0]) * half,
                (c1[1] + c2[1]) * half,
                (c1[2] + c2[2]) * half,
            ],
        );
    }
    if s1 == zero {
        return (s2, c2);
    }
    if s2 == zero {
        return (s1, c1);
    }
    let eps = T::from_f64(EPS_FUSE);
    let sigma = s1 + s2;
    if s1 < eps && s2 < eps {
        return (
            sigma,
            [
                (c1[0] + c2[0]) * half,
                (c1[1] + c2[1]) * half,
                (c1[2] + c2[2]) * half,
            ],
        );
    }
    let denom = s1 + s2 + eps;
    let color = [
        (s1 * c1[0] + s2 * c2[0]) / denom,
        (s1 * c1[1] + s2 * c2[1]) / denom,
        (s1 * c1[2] + s2 * c2[2]) / denom,
    ];
    (sigma, color)
}

/// Literal raw sum of colors (config `fusion: raw_sum`); may leave [0,1].
pub fn fuse_point_raw_sum<T: Real>(s1: T, c1: [T; 3], s2: T, c2: [T; 3]) -> (T, [T; 3]) {
    (s1 + s2, [c1[0] + c2[0], c1[1] + c2[1], c1[2] + c2[2]])
}

/// Gradients of [`fuse_point`] w.r.t. both branches.
/// Returns (d_s1, d_c1, d_s2, d_c2).
pub fn fuse_point_backward<T: Real>(
    s1: T,
    c1: [T; 3],
    s2: T,
    c2: [T; 3],
    d_sigma: T,
    d_color: [T; 3],
) -> (T, [T; 3], T, [T; 3]) {
    let zero = T::zero();
    let half = T::from_f64(0.5);
    let eps = T::from_f64(EPS_FUSE);
    let both_tiny = (s1 == zero && s2 == zero) || (s1 < eps && s2 < eps && s1 > zero && s2 > zero);
    if both_tiny {
        let dch = [d_color[0] * half, d_color[1] * half, d_color[2] * half];
        return (d_sigma, dch, d_sigma, dch);
    }
    // Blend-formula derivative; also the limit at an exact-zero branch.
    let denom = s1 + s2 + eps;
    let blend = [
        (s1 * c1[0] + s2 * c2[0]) / denom,
        (s1 * c1[1] + s2 * c2[1]) / denom,
        (s1 * c1[2] + s2 * c2[2]) / denom,
    ];
    let mut ds1 = d_sigma;
    let mut ds2 = d_sigma;
    for k in 0..3 {
        ds1 += (c1[k] - blend[k]) / denom * d_color[k];
        ds2 += (c2[k] - blend[k]) / denom * d_color[k];
    }
    let w1 = s1 / denom;
    let w2 = s2 / denom;
    (
        ds1,
        [d_color[0] * w1, d_color[1] * w1, d_color[2] * w1],
        ds2,
        [d_color[0] * w2, d_color[1] * w2, d_color[2] * w2],
    )
}

pub fn fuse_raw_sum_backward<T: Real>(d_sigma: T, d_color: [T; 3]) -> (T, [T; 3], T, [T; 3]) {
    (d_sigma, d_color, d_sigma, d_color)
}
