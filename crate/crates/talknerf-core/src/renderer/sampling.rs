//! Quadrature sample placement along rays.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::real::Real;

/// Partition [t_near, t_far] into `n` equal bins; deterministic midpoints
/// without an rng, one uniform draw per bin with one.
pub fn sample_ts(
    out: &mut Vec<f64>,
    t_near: f64,
    t_far: f64,
    n: usize,
    rng: Option<&mut ChaCha8Rng>,
) {
    assert!(n >= 1);
    assert!(t_near < t_far);
    out.clear();
    let w = (t_far - t_near) / n as f64;
    match rng {
        None => {
            for i in 0..n {
                out.push(t_near + (i as f64 + 0.5) * w);
            }
        }
        Some(rng) => {
            for i in 0..n {
                let u: f64 = rng.gen();
                out.push(t_near + (i as f64 + u) * w);
            }
        }
    }
}

/// delta_i = t_{i+1} - t_i, with the last interval reaching t_far.
pub fn deltas_from_ts<T: Real>(ts: &[f64], t_far: f64, out: &mut Vec<T>) {
    out.clear();
    for i in 0..ts.len() {
        let next = if i + 1 < ts.len() { ts[i + 1] } else { t_far };
        out.push(T::from_f64(next - ts[i]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn single_midpoint() {
        let mut ts = Vec::new();
        sample_ts(&mut ts, 0.2, 0.8, 1, None);
        assert_eq!(ts, vec![0.5]);
    }

    #[test]
    fn four_midpoints_closed_form() {
        let mut ts = Vec::new();
        sample_ts(&mut ts, 0.0, 1.0, 4, None);
        let want = [0.125, 0.375, 0.625, 0.875];
        for (a, b) in ts.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn stratified_samples_stay_in_their_bins() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ts = Vec::new();
            sample_ts(&mut ts, 1.0, 3.0, 16, Some(&mut rng));
            let w = 2.0 / 16.0;
            for (i, t) in ts.iter().enumerate() {
                let lo = 1.0 + i as f64 * w;
                assert!(*t >= lo && *t < lo + w, "seed {seed} bin {i}: {t}");
            }
        }
    }

    #[test]
    fn deltas_cover_to_t_far() {
        let mut ts = Vec::new();
        sample_ts(&mut ts, 0.0, 1.0, 4, None);
        let mut deltas: Vec<f64> = Vec::new();
        deltas_from_ts(&ts, 1.0, &mut deltas);
        assert_eq!(deltas.len(), 4);
        for d in &deltas[..3] {
            assert!((d - 0.25).abs() < 1e-15);
        }
        assert!((deltas[3] - 0.125).abs() < 1e-15);
    }
}
