//! Condition fusion: frequency-lift the audio and blink scalars,
//! concatenate, and map through one small MLP to the condition width D.

use crate::diffcore::{GradSink, Mlp, ParamRegistry, ParamTensor};
use crate::encoders::freq::{freq_dim, frequency_encode};
use crate::real::Real;

use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Default)]
pub struct ConditionCache<T: Real> {
    pub lift: Vec<T>,
    pub mlp_cache: Vec<T>,
    pub d: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ConditionNet<T: Real> {
    pub mlp: Mlp<T>,
    pub n_freqs_audio: usize,
    pub n_freqs_blink: usize,
}

impl<T: Real> ConditionNet<T> {
    pub fn new(
        reg: &mut ParamRegistry,
        n_freqs_audio: usize,
        n_freqs_blink: usize,
        hidden: usize,
        width: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let in_dim = freq_dim(1, n_freqs_audio) + freq_dim(1, n_freqs_blink);
        let mlp = Mlp::new(reg, "cond", &[in_dim, hidden, width], rng);
        Self {
            mlp,
            n_freqs_audio,
            n_freqs_blink,
        }
    }

    pub fn width(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn lift_dim(&self) -> usize {
        self.mlp.in_dim()
    }

    pub fn prepare_cache(&self, cache: &mut ConditionCache<T>) {
        cache.lift.resize(self.lift_dim(), T::zero());
        cache.mlp_cache.resize(self.mlp.cache_len(), T::zero());
        cache.d.resize(self.width(), T::zero());
    }

    /// Deterministic in its inputs: two frames with identical scalars get
    /// identical condition vectors.
    pub fn forward(&self, audio: T, blink: T, cache: &mut ConditionCache<T>) {
        self.prepare_cache(cache);
        let na = freq_dim(1, self.n_freqs_audio);
        frequency_encode(&[audio], self.n_freqs_audio, &mut cache.lift[..na]);
        frequency_encode(&[blink], self.n_freqs_blink, &mut cache.lift[na..]);
        let (lift, d) = (&cache.lift, &mut cache.d);
        self.mlp.forward(lift, &mut cache.mlp_cache, d);
    }

    pub fn backward(
        &self,
        cache: &ConditionCache<T>,
        d_cond: &[T],
        scratch: &mut [T],
        g: &mut GradSink<T>,
    ) {
        self.mlp
            .backward(&cache.lift, &cache.mlp_cache, d_cond, None, scratch, g);
    }

    pub fn tensors(&self) -> Vec<&ParamTensor<T>> {
        self.mlp.tensors()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        self.mlp.tensors_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn net(seed: u64) -> ConditionNet<f64> {
        let mut reg = ParamRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ConditionNet::new(&mut reg, 4, 3, 8, 6, &mut rng)
    }

    #[test]
    fn identical_inputs_identical_condition() {
        let n = net(2);
        let mut a = ConditionCache::default();
        let mut b = ConditionCache::default();
        n.forward(0.37, 0.81, &mut a);
        n.forward(0.37, 0.81, &mut b);
        assert_eq!(a.d, b.d);
    }

    #[test]
    fn zero_scalars_match_independent_evaluation() {
        // At (0,0) the lift is (sin=0, cos=1) per frequency; push that
        // vector through a naive MLP evaluation as the oracle.
        let n = net(3);
        let mut cache = ConditionCache::default();
        n.forward(0.0, 0.0, &mut cache);

        let mut lift = vec![0.0f64; n.lift_dim()];
        for k in 0..n.lift_dim() / 2 {
            lift[2 * k + 1] = 1.0;
        }
        let mut cur = lift;
        let nl = n.mlp.layers.len();
        for (l, layer) in n.mlp.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.d_out];
            for o in 0..layer.d_out {
                let mut acc = layer.b.values[o];
                for i in 0..layer.d_in {
                    acc += layer.w.values[o * layer.d_in + i] * cur[i];
                }
                next[o] = if l == nl - 1 { acc } else { acc.max(0.0) };
            }
            cur = next;
        }
        for (a, b) in cache.d.iter().zip(cur.iter()) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn blink_perturbation_flows_through_blink_columns_only() {
        // Structural: first-layer activations may only change through the
        // blink block of input columns when blink alone changes.
        let n = net(4);
        let na = freq_dim(1, n.n_freqs_audio);
        let mut c0 = ConditionCache::default();
        let mut c1 = ConditionCache::default();
        n.forward(0.25, 0.2, &mut c0);
        n.forward(0.25, 0.9, &mut c1);
        assert_eq!(&c0.lift[..na], &c1.lift[..na]);
        assert_ne!(&c0.lift[na..], &c1.lift[na..]);
        assert_ne!(c0.d, c1.d);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut n = net(5);
        let r: Vec<f64> = (0..6).map(|i| 0.3 * (i as f64) - 0.8).collect();
        let loss = |n: &ConditionNet<f64>| -> f64 {
            let mut c = ConditionCache::default();
            n.forward(0.4, 0.6, &mut c);
            c.d.iter().zip(r.iter()).map(|(a, b)| a * b).sum()
        };
        let tensors = n.tensors();
        let mut g = GradSink::zeros_like(&tensors);
        let mut cache = ConditionCache::default();
        n.forward(0.4, 0.6, &mut cache);
        let mut scratch = vec![0.0; n.mlp.scratch_len()];
        n.backward(&cache, &r, &mut scratch, &mut g);

        let eps = 1e-6;
        for ti in 0..n.tensors().len() {
            for vi in 0..n.tensors()[ti].len() {
                let id = n.tensors()[ti].id;
                let orig = n.tensors()[ti].values[vi];
                n.tensors_mut()[ti].values[vi] = orig + eps;
                let lp = loss(&n);
                n.tensors_mut()[ti].values[vi] = orig - eps;
                let lm = loss(&n);
                n.tensors_mut()[ti].values[vi] = orig;
                let num = (lp - lm) / (2.0 * eps);
                let ana = g.buf(id)[vi];
                assert!((num - ana).abs() < 1e-7, "t{ti}[{vi}]: {ana} vs {num}");
            }
        }
    }
}
