//! Central finite-difference verification of analytic gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

#[derive(Debug, Clone)]
pub struct GradCheckSettings {
    pub n_samples: usize,
    pub eps: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self {
            n_samples: 200,
            eps: 1e-5,
            tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckFailure {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub op_name: String,
    pub n_checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Relative error with a floor so that near-zero pairs compare absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compare analytic gradients of `loss_and_grad` against central differences
/// of `loss_only` at `x0`, on `n_samples` coordinates drawn without
/// replacement under the fixed seed (all coordinates when the vector is
/// smaller than the sample budget).
pub fn gradcheck_fn(
    op_name: &str,
    x0: &[f64],
    mut loss_and_grad: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    mut loss_only: impl FnMut(&[f64]) -> f64,
    settings: &GradCheckSettings,
) -> GradCheckReport {
    let dim = x0.len();
    let (_, analytic) = loss_and_grad(x0);
    assert_eq!(analytic.len(), dim, "gradient length mismatch in {op_name}");

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let indices: Vec<usize> = if dim <= settings.n_samples {
        (0..dim).collect()
    } else {
        // Partial Fisher-Yates draw without replacement.
        let mut pool: Vec<usize> = (0..dim).collect();
        let mut picked = Vec::with_capacity(settings.n_samples);
        for i in 0..settings.n_samples {
            let j = rng.gen_range(i..dim);
            pool.swap(i, j);
            picked.push(pool[i]);
        }
        picked
    };

    let mut x = x0.to_vec();
    let mut max_rel = 0.0f64;
    let mut failures = Vec::new();
    for &i in &indices {
        let orig = x[i];
        x[i] = orig + settings.eps;
        let lp = loss_only(&x);
        x[i] = orig - settings.eps;
        let lm = loss_only(&x);
        x[i] = orig;
        let numeric = (lp - lm) / (2.0 * settings.eps);
        let err = rel_err(analytic[i], numeric);
        if err > max_rel {
            max_rel = err;
        }
        if err >= settings.tol {
            failures.push(GradCheckFailure {
                index: i,
                analytic: analytic[i],
                numeric,
            });
        }
    }

    GradCheckReport {
        op_name: op_name.to_string(),
        n_checked: indices.len(),
        max_rel_err: max_rel,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        // loss = <w, x> with fixed w; gradient is w itself.
        let w: Vec<f64> = (0..32).map(|i| (i as f64 - 11.0) * 0.17).collect();
        let x0: Vec<f64> = (0..32).map(|i| (i as f64) * 0.05).collect();
        let wl = w.clone();
        let report = gradcheck_fn(
            "linear_map",
            &x0,
            |x| {
                let l = x.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                (l, w.clone())
            },
            |x| x.iter().zip(wl.iter()).map(|(a, b)| a * b).sum(),
            &GradCheckSettings::default(),
        );
        assert!(report.max_rel_err < 1e-8, "max {}", report.max_rel_err);
        assert!(report.failures.is_empty());
        assert_eq!(report.n_checked, 32);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let x0 = vec![0.7; 4];
        let report = gradcheck_fn(
            "broken",
            &x0,
            |x| (x.iter().map(|v| v * v).sum(), vec![1.0; 4]),
            |x| x.iter().map(|v| v * v).sum(),
            &GradCheckSettings::default(),
        );
        assert!(!report.failures.is_empty());
        assert!(report.max_rel_err > 1e-2);
    }

    #[test]
    fn deterministic_under_seed() {
        let x0: Vec<f64> = (0..5000).map(|i| (i as f64).sin()).collect();
        let run = || {
            gradcheck_fn(
                "sum_sq",
                &x0,
                |x| {
                    let l = x.iter().map(|v| v * v).sum();
                    (l, x.iter().map(|v| 2.0 * v).collect())
                },
                |x| x.iter().map(|v| v * v).sum(),
                &GradCheckSettings {
                    n_samples: 64,
                    seed: 7,
                    ..Default::default()
                },
            )
        };
        let a = run();
        let b = run();
        assert_eq!(a.n_checked, 64);
        assert_eq!(a.max_rel_err, b.max_rel_err);
    }
}
