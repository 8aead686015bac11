//! Discrete quadrature of the rendering integral.
//!
//! T_1 = 1;  w_i = T_i (1 - exp(-sigma_i delta_i));  T_{i+1} = T_i exp(-..);
//! C = sum w_i c_i + T_final * background.

use crate::real::Real;

/// Composite one ray. `colors` is `n*3`; per-sample weights are written to
/// `weights`. Returns (rgb, final transmittance).
pub fn composite<T: Real>(
    sigma: &[T],
    colors: &[T],
    deltas: &[T],
    background: [T; 3],
    weights: &mut [T],
) -> ([T; 3], T) {
    let n = sigma.len();
    debug_assert_eq!(colors.len(), n * 3);
    debug_assert_eq!(deltas.len(), n);
    debug_assert_eq!(weights.len(), n);
    let mut trans = T::one();
    let mut rgb = [T::zero(); 3];
    for i in 0..n {
        debug_assert!(sigma[i] >= T::zero());
        let e = (-sigma[i] * deltas[i]).exp();
        let w = trans * (T::one() - e);
        weights[i] = w;
        for k in 0..3 {
            rgb[k] += w * colors[i * 3 + k];
        }
        trans *= e;
    }
    for k in 0..3 {
        rgb[k] += trans * background[k];
    }
    (rgb, trans)
}

/// Reverse pass of [`composite`]. `t_buf` is caller scratch of length n.
/// d_sigma and d_colors are written, not accumulated.
#[allow(clippy::too_many_arguments)]
pub fn composite_backward<T: Real>(
    sigma: &[T],
    colors: &[T],
    deltas: &[T],
    background: [T; 3],
    weights: &[T],
    t_final: T,
    d_rgb: [T; 3],
    d_sigma: &mut [T],
    d_colors: &mut [T],
    t_buf: &mut [T],
) {
    let n = sigma.len();
    // Forward transmittance prefix: t_buf[i] = T_i.
    let mut trans = T::one();
    for i in 0..n {
        t_buf[i] = trans;
        trans *= (-sigma[i] * deltas[i]).exp();
    }

    let bg_term = t_final
        * (background[0] * d_rgb[0] + background[1] * d_rgb[1] + background[2] * d_rgb[2]);

    // Suffix accumulation of w_i <c_i, u> for the occlusion term.
    let mut suffix = T::zero();
    for i in (0..n).rev() {
        let ci = &colors[i * 3..(i + 1) * 3];
        let q = ci[0] * d_rgb[0] + ci[1] * d_rgb[1] + ci[2] * d_rgb[2];
        let e = (-sigma[i] * deltas[i]).exp();
        d_sigma[i] = deltas[i] * (t_buf[i] * e * q - suffix - bg_term);
        for k in 0..3 {
            d_colors[i * 3 + k] = weights[i] * d_rgb[k];
        }
        suffix += weights[i] * q;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(sigma: &[f64], colors: &[f64], deltas: &[f64], bg: [f64; 3]) -> ([f64; 3], f64, Vec<f64>) {
        let mut w = vec![0.0; sigma.len()];
        let (rgb, tf) = composite(sigma, colors, deltas, bg, &mut w);
        (rgb, tf, w)
    }

    #[test]
    fn transparent_ray_shows_background() {
        let (rgb, tf, w) = run(
            &[0.0, 0.0, 0.0],
            &[1.0; 9],
            &[0.1, 0.1, 0.1],
            [0.2, 0.4, 0.6],
        );
        assert_eq!(rgb, [0.2, 0.4, 0.6]);
        assert_eq!(tf, 1.0);
        assert!(w.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn opaque_first_sample_dominates() {
        let (rgb, tf, _) = run(
            &[1e6, 1.0],
            &[0.9, 0.1, 0.3, 0.0, 1.0, 0.0],
            &[1.0, 1.0],
            [0.0; 3],
        );
        assert!((rgb[0] - 0.9).abs() < 1e-9);
        assert!((rgb[1] - 0.1).abs() < 1e-9);
        assert!(tf < 1e-12);
    }

    #[test]
    fn two_sample_golden_case() {
        // Discrete recurrence evaluated independently in high precision:
        // sigma=(1,2), delta=(0.1,0.1), c1=(1,0,0), c2=(0,1,0), black bg.
        let (rgb, tf, w) = run(
            &[1.0, 2.0],
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            &[0.1, 0.1],
            [0.0; 3],
        );
        assert!((w[0] - 0.09516258196404048).abs() < 1e-15);
        assert!((w[1] - 0.16401919735424172).abs() < 1e-15);
        assert!((rgb[0] - 0.09516258196404048).abs() < 1e-15);
        assert!((rgb[1] - 0.16401919735424172).abs() < 1e-15);
        assert_eq!(rgb[2], 0.0);
        assert!((tf - 0.7408182206817178).abs() < 1e-15);
    }

    #[test]
    fn weights_plus_final_transmittance_is_one() {
        let sigma = [0.3, 7.0, 0.01, 2.5, 40.0];
        let colors = [0.5; 15];
        let deltas = [0.2, 0.05, 0.3, 0.01, 0.1];
        let (_, tf, w) = run(&sigma, &colors, &deltas, [0.0; 3]);
        let total: f64 = w.iter().sum::<f64>() + tf;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn transmittance_is_non_increasing() {
        let sigma = [0.5, 0.0, 3.0, 1.0];
        let deltas = [0.1; 4];
        let mut trans = 1.0;
        let mut prev = 1.0;
        for i in 0..4 {
            trans *= (-sigma[i] * deltas[i]as f64).exp();
            assert!(trans <= prev);
            prev = trans;
        }
    }

    #[test]
    fn split_interval_is_exact_for_constant_fields() {
        // Splitting a constant-sigma interval in half changes nothing.
        let (rgb_a, tf_a, _) = run(&[2.0], &[0.3, 0.6, 0.9], &[0.4], [0.1, 0.1, 0.1]);
        let (rgb_b, tf_b, _) = run(
            &[2.0, 2.0],
            &[0.3, 0.6, 0.9, 0.3, 0.6, 0.9],
            &[0.2, 0.2],
            [0.1, 0.1, 0.1],
        );
        for k in 0..3 {
            assert!((rgb_a[k] - rgb_b[k]).abs() < 1e-9);
        }
        assert!((tf_a - tf_b).abs() < 1e-9);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let sigma0 = vec![0.8, 2.2, 0.1, 4.0];
        let colors0 = vec![
            0.9, 0.1, 0.2, 0.3, 0.8, 0.5, 0.1, 0.1, 0.9, 0.6, 0.4, 0.2,
        ];
        let deltas = vec![0.15, 0.2, 0.1, 0.25];
        let bg = [0.25, 0.5, 0.75];
        let u = [1.0, -0.7, 0.4];

        let loss = |sigma: &[f64], colors: &[f64]| -> f64 {
            let mut w = vec![0.0; sigma.len()];
            let (rgb, _) = composite(sigma, colors, &deltas, bg, &mut w);
            rgb[0] * u[0] + rgb[1] * u[1] + rgb[2] * u[2]
        };

        let mut w = vec![0.0; 4];
        let (_, tf) = composite(&sigma0, &colors0, &deltas, bg, &mut w);
        let mut ds = vec![0.0; 4];
        let mut dc = vec![0.0; 12];
        let mut tbuf = vec![0.0; 4];
        composite_backward(&sigma0, &colors0, &deltas, bg, &w, tf, u, &mut ds, &mut dc, &mut tbuf);

        let eps = 1e-7;
        for i in 0..4 {
            let mut sp = sigma0.clone();
            sp[i] += eps;
            let mut sm = sigma0.clone();
            sm[i] -= eps;
            let num = (loss(&sp, &colors0) - loss(&sm, &colors0)) / (2.0 * eps);
            assert!((num - ds[i]).abs() < 1e-7, "ds[{i}]: {} vs {num}", ds[i]);
        }
        for i in 0..12 {
            let mut cp = colors0.clone();
            cp[i] += eps;
            let mut cm = colors0.clone();
            cm[i] -= eps;
            let num = (loss(&sigma0, &cp) - loss(&sigma0, &cm)) / (2.0 * eps);
            assert!((num - dc[i]).abs() < 1e-8, "dc[{i}]: {} vs {num}", dc[i]);
        }
    }
}
