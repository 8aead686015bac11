//! Linear layers and small ReLU MLPs with hand-written backward passes.
//!
//! Forward passes write intermediates into caller-provided flat caches so
//! per-ray scratch buffers can be reused across samples without allocation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::real::{axpy, dot, Real};

use super::tensor::{GradSink, ParamRegistry, ParamTensor};

fn kaiming_uniform<T: Real>(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
        .collect()
}

/// Fully connected layer, weights row-major `[out][in]`, zero-init biases.
#[derive(Debug, Clone)]
pub struct Linear<T: Real> {
    pub w: ParamTensor<T>,
    pub b: ParamTensor<T>,
    pub d_in: usize,
    pub d_out: usize,
}

impl<T: Real> Linear<T> {
    pub fn new(
        reg: &mut ParamRegistry,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let w = ParamTensor::new(
            reg.issue(),
            format!("{name}.w"),
            vec![d_out, d_in],
            kaiming_uniform(rng, d_in, d_out * d_in),
        );
        let b = ParamTensor::new(
            reg.issue(),
            format!("{name}.b"),
            vec![d_out],
            vec![T::zero(); d_out],
        );
        Self { w, b, d_in, d_out }
    }

    pub fn forward(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.d_in);
        debug_assert_eq!(y.len(), self.d_out);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w.values[o * self.d_in..(o + 1) * self.d_in];
            *yo = self.b.values[o] + dot(row, x);
        }
    }

    /// Accumulates dW, db into `g`; writes dL/dx into `dx` when given.
    pub fn backward(&self, x: &[T], dy: &[T], mut dx: Option<&mut [T]>, g: &mut GradSink<T>) {
        debug_assert_eq!(dy.len(), self.d_out);
        if let Some(dx) = dx.as_deref_mut() {
            dx.iter_mut().for_each(|v| *v = T::zero());
        }
        let dw = g.buf_mut(self.w.id);
        for (o, &dyo) in dy.iter().enumerate() {
            axpy(dyo, x, &mut dw[o * self.d_in..(o + 1) * self.d_in]);
        }
        let db = g.buf_mut(self.b.id);
        axpy(T::one(), dy, db);
        if let Some(dx) = dx {
            for (o, &dyo) in dy.iter().enumerate() {
                let row = &self.w.values[o * self.d_in..(o + 1) * self.d_in];
                axpy(dyo, row, dx);
            }
        }
    }
}

/// Bias-free projection matrix (attention Q/K/V maps).
#[derive(Debug, Clone)]
pub struct Proj<T: Real> {
    pub w: ParamTensor<T>,
    pub d_in: usize,
    pub d_out: usize,
}

impl<T: Real> Proj<T> {
    pub fn new(
        reg: &mut ParamRegistry,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let w = ParamTensor::new(
            reg.issue(),
            format!("{name}.w"),
            vec![d_out, d_in],
            kaiming_uniform(rng, d_in, d_out * d_in),
        );
        Self { w, d_in, d_out }
    }

    pub fn forward(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.d_in);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w.values[o * self.d_in..(o + 1) * self.d_in];
            *yo = dot(row, x);
        }
    }

    pub fn backward(&self, x: &[T], dy: &[T], mut dx: Option<&mut [T]>, g: &mut GradSink<T>) {
        if let Some(dx) = dx.as_deref_mut() {
            dx.iter_mut().for_each(|v| *v = T::zero());
        }
        let dw = g.buf_mut(self.w.id);
        for (o, &dyo) in dy.iter().enumerate() {
            axpy(dyo, x, &mut dw[o * self.d_in..(o + 1) * self.d_in]);
        }
        if let Some(dx) = dx {
            for (o, &dyo) in dy.iter().enumerate() {
                let row = &self.w.values[o * self.d_in..(o + 1) * self.d_in];
                axpy(dyo, row, dx);
            }
        }
    }
}

/// Small MLP with ReLU between layers and a linear output.
///
/// Callers apply their own output activation (softplus, sigmoid) so its
/// derivative stays next to the code that owns it.
#[derive(Debug, Clone)]
pub struct Mlp<T: Real> {
    pub layers: Vec<Linear<T>>,
    pub dims: Vec<usize>,
}

impl<T: Real> Mlp<T> {
    pub fn new(reg: &mut ParamRegistry, name: &str, dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "mlp needs at least input and output dims");
        let layers = (0..dims.len() - 1)
            .map(|l| Linear::new(reg, &format!("{name}.l{l}"), dims[l], dims[l + 1], rng))
            .collect();
        Self {
            layers,
            dims: dims.to_vec(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Cache stores pre- and post-activation of every hidden layer.
    pub fn cache_len(&self) -> usize {
        2 * self.dims[1..self.dims.len() - 1].iter().sum::<usize>()
    }

    /// Backward needs two ping-pong buffers of the widest layer output.
    pub fn scratch_len(&self) -> usize {
        2 * self.dims[1..].iter().copied().max().unwrap_or(0)
    }

    /// `y` receives the final linear output (no activation).
    pub fn forward(&self, x: &[T], cache: &mut [T], y: &mut [T]) {
        debug_assert_eq!(cache.len(), self.cache_len());
        debug_assert_eq!(y.len(), self.out_dim());
        let n = self.layers.len();
        // Absolute range of the previous layer's post-activation in `cache`.
        let mut a_prev: Option<(usize, usize)> = None;
        let mut off = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            if l == n - 1 {
                match a_prev {
                    None => layer.forward(x, y),
                    Some((s, e)) => layer.forward(&cache[s..e], y),
                }
            } else {
                let w = layer.d_out;
                let (head, tail) = cache.split_at_mut(off);
                let (z, rest) = tail.split_at_mut(w);
                match a_prev {
                    None => layer.forward(x, z),
                    Some((s, e)) => layer.forward(&head[s..e], z),
                }
                let a = &mut rest[..w];
                for (ai, zi) in a.iter_mut().zip(z.iter()) {
                    *ai = zi.max(T::zero());
                }
                a_prev = Some((off + w, off + 2 * w));
                off += 2 * w;
            }
        }
    }

    /// `dz_out` is the gradient at the final *linear* output. Weight grads
    /// accumulate in `g`; dL/dx is written into `dx` when given. `scratch`
    /// must be at least [`Self::scratch_len`] long.
    pub fn backward(
        &self,
        x: &[T],
        cache: &[T],
        dz_out: &[T],
        dx: Option<&mut [T]>,
        scratch: &mut [T],
        g: &mut GradSink<T>,
    ) {
        let n = self.layers.len();
        if n == 1 {
            self.layers[0].backward(x, dz_out, dx, g);
            return;
        }
        // Cache offset of each hidden layer's (z, a) block.
        let mut offsets = Vec::with_capacity(n - 1);
        let mut off = 0;
        for layer in &self.layers[..n - 1] {
            offsets.push(off);
            off += 2 * layer.d_out;
        }

        let half = self.scratch_len() / 2;
        let (mut cur, mut next) = scratch.split_at_mut(half);
        cur[..dz_out.len()].copy_from_slice(dz_out);

        for l in (1..n).rev() {
            let layer = &self.layers[l];
            let w_prev = self.layers[l - 1].d_out;
            let input_off = offsets[l - 1] + w_prev;
            let input = &cache[input_off..input_off + w_prev];
            layer.backward(input, &cur[..layer.d_out], Some(&mut next[..w_prev]), g);
            // ReLU derivative from the cached pre-activation.
            let z_prev = &cache[offsets[l - 1]..offsets[l - 1] + w_prev];
            for (d, z) in next[..w_prev].iter_mut().zip(z_prev.iter()) {
                if *z <= T::zero() {
                    *d = T::zero();
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        self.layers[0].backward(x, &cur[..self.layers[0].d_out], dx, g);
    }

    pub fn tensors(&self) -> Vec<&ParamTensor<T>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn seeded_mlp(dims: &[usize], seed: u64) -> (Mlp<f64>, ParamRegistry) {
        let mut reg = ParamRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp = Mlp::new(&mut reg, "m", dims, &mut rng);
        (mlp, reg)
    }

    /// Independent naive forward used as the oracle.
    fn naive_forward(mlp: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let n = mlp.layers.len();
        for (l, layer) in mlp.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.d_out];
            for o in 0..layer.d_out {
                let mut acc = layer.b.values[o];
                for i in 0..layer.d_in {
                    acc += layer.w.values[o * layer.d_in + i] * cur[i];
                }
                next[o] = if l == n - 1 { acc } else { acc.max(0.0) };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn forward_matches_naive() {
        let (mlp, _) = seeded_mlp(&[5, 8, 7, 3], 11);
        let x: Vec<f64> = (0..5).map(|i| (i as f64) * 0.3 - 0.7).collect();
        let mut cache = vec![0.0; mlp.cache_len()];
        let mut y = vec![0.0; 3];
        mlp.forward(&x, &mut cache, &mut y);
        let want = naive_forward(&mlp, &x);
        for (a, b) in y.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (mut mlp, _) = seeded_mlp(&[4, 6, 3], 3);
        let x = [0.2, -0.4, 0.9, 0.1];
        let r = [0.7, -1.3, 0.5];

        let loss = |m: &Mlp<f64>| -> f64 {
            let mut cache = vec![0.0; m.cache_len()];
            let mut y = vec![0.0; 3];
            m.forward(&x, &mut cache, &mut y);
            y.iter().zip(r.iter()).map(|(a, b)| a * b).sum()
        };

        let tensors = mlp.tensors();
        let mut g = GradSink::zeros_like(&tensors);
        let mut cache = vec![0.0; mlp.cache_len()];
        let mut y = vec![0.0; 3];
        mlp.forward(&x, &mut cache, &mut y);
        let mut scratch = vec![0.0; mlp.scratch_len()];
        let mut dx = vec![0.0; 4];
        mlp.backward(&x, &cache, &r, Some(&mut dx), &mut scratch, &mut g);

        let eps = 1e-6;
        let n_tensors = mlp.tensors().len();
        for ti in 0..n_tensors {
            for vi in 0..mlp.tensors()[ti].len() {
                let orig = mlp.tensors()[ti].values[vi];
                let id = mlp.tensors()[ti].id;
                mlp.tensors_mut()[ti].values[vi] = orig + eps;
                let lp = loss(&mlp);
                mlp.tensors_mut()[ti].values[vi] = orig - eps;
                let lm = loss(&mlp);
                mlp.tensors_mut()[ti].values[vi] = orig;
                let num = (lp - lm) / (2.0 * eps);
                let ana = g.buf(id)[vi];
                assert!(
                    (num - ana).abs() < 1e-7 * (1.0 + num.abs()),
                    "tensor {ti} idx {vi}: analytic {ana} vs numeric {num}"
                );
            }
        }
    }

    #[test]
    fn dx_matches_finite_differences() {
        let (mlp, _) = seeded_mlp(&[3, 5, 2], 9);
        let r = [1.1, -0.6];
        let x0 = [0.15, -0.22, 0.4];
        let loss_at = |x: &[f64]| -> f64 {
            let mut cache = vec![0.0; mlp.cache_len()];
            let mut y = vec![0.0; 2];
            mlp.forward(x, &mut cache, &mut y);
            y.iter().zip(r.iter()).map(|(a, b)| a * b).sum()
        };
        let tensors = mlp.tensors();
        let mut g = GradSink::zeros_like(&tensors);
        let mut cache = vec![0.0; mlp.cache_len()];
        let mut y = vec![0.0; 2];
        mlp.forward(&x0, &mut cache, &mut y);
        let mut scratch = vec![0.0; mlp.scratch_len()];
        let mut dx = vec![0.0; 3];
        mlp.backward(&x0, &cache, &r, Some(&mut dx), &mut scratch, &mut g);

        let eps = 1e-6;
        for i in 0..3 {
            let mut xp = x0;
            xp[i] += eps;
            let mut xm = x0;
            xm[i] -= eps;
            let num = (loss_at(&xp) - loss_at(&xm)) / (2.0 * eps);
            assert!((num - dx[i]).abs() < 1e-8, "dx[{i}]: {} vs {num}", dx[i]);
        }
    }
}
