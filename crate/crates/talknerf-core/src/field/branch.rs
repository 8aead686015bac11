//! One conditional radiance branch: triplane-hash encoder, point MLP,
//! audio-query attention, and density/color heads. Instantiated twice
//! (mouth = branch 1, face = branch 2) over one shared coordinate space.

use rand_chacha::ChaCha8Rng;

use crate::config::{AttentionMode, AttentionScale, DensityActivation, RunConfig};
use crate::diffcore::{GradSink, Mlp, ParamRegistry, ParamTensor, Proj};
use crate::encoders::freq::freq_dim;
use crate::encoders::hash::{HashGridConfig, PlaneQuery, TriplaneEncoder};
use crate::geom::Aabb;
use crate::real::{sigmoid, sigmoid_grad_from_output, softplus, Real};

use super::attention::{attend_backward, attend_forward};

/// Per-ray forward record for one branch; reused across rays.
#[derive(Debug, Clone, Default)]
pub struct BranchRayCache<T: Real> {
    /// Number of samples this branch evaluated (inside its bounding box).
    pub m: usize,
    /// Indices into the ray's sample list, ascending.
    pub sel: Vec<usize>,
    /// World positions of selected samples, m*3.
    pub xw: Vec<T>,
    pub fx: Vec<T>,
    pub queries: Vec<PlaneQuery<T>>,
    pub pm_in: Vec<T>,
    pub pm_cache: Vec<T>,
    pub x_feat: Vec<T>,
    pub keys: Vec<T>,
    pub vals: Vec<T>,
    pub q: Vec<T>,
    pub alpha: Vec<T>,
    pub pooled: Vec<T>,
    pub attended: Vec<T>,
    pub dh_cache: Vec<T>,
    pub h: Vec<T>,
    pub sigma: Vec<T>,
    pub ch_in: Vec<T>,
    pub ch_cache: Vec<T>,
    pub color: Vec<T>,
}

/// Backward temporaries; one per worker.
#[derive(Debug, Clone, Default)]
pub struct BranchScratch<T: Real> {
    pub mlp: Vec<T>,
    pub d_attended: Vec<T>,
    pub d_vals: Vec<T>,
    pub d_keys: Vec<T>,
    pub dq: Vec<T>,
    pub dc_pre: [T; 3],
    pub dh: Vec<T>,
    pub d_ch_in: Vec<T>,
    pub d_x_feat: Vec<T>,
    pub d_pm_in: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct RadianceBranch<T: Real> {
    pub triplane: TriplaneEncoder<T>,
    pub point_mlp: Mlp<T>,
    pub w_q: Proj<T>,
    pub w_k: Proj<T>,
    pub w_v: Proj<T>,
    pub density_head: Mlp<T>,
    pub color_head: Mlp<T>,
    pub bbox: Aabb,
    pub d_attn: usize,
    pub d_v: usize,
    pub geo_dim: usize,
    pub dir_dim: usize,
    pub attention: AttentionMode,
    pub scale: T,
    pub density_activation: DensityActivation,
}

impl<T: Real> RadianceBranch<T> {
    pub fn new(
        reg: &mut ParamRegistry,
        name: &str,
        cfg: &RunConfig,
        bbox: Aabb,
        d_cond: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let f = &cfg.field;
        let grid = HashGridConfig::from(&cfg.encoder);
        let fx_dim = 3 * grid.feature_dim();
        let a_len = freq_dim(1, cfg.condition.n_freqs_audio);
        let dir_dim = freq_dim(3, f.n_freqs_dir);

        let triplane = TriplaneEncoder::new(reg, name, grid, rng);
        let point_mlp = Mlp::new(
            reg,
            &format!("{name}.point"),
            &[fx_dim + d_cond, f.point_hidden, f.d_v],
            rng,
        );
        let w_q = Proj::new(reg, &format!("{name}.attn.q"), a_len, f.d_attn, rng);
        let w_k = Proj::new(reg, &format!("{name}.attn.k"), 3, f.d_attn, rng);
        let w_v = Proj::new(reg, &format!("{name}.attn.v"), f.d_v, f.d_v, rng);

        let mut density_dims = vec![f.d_v];
        density_dims.extend(std::iter::repeat(f.head_hidden).take(f.head_layers));
        density_dims.push(1 + f.geo_dim);
        let density_head = Mlp::new(reg, &format!("{name}.density"), &density_dims, rng);

        let mut color_dims = vec![f.geo_dim + dir_dim];
        color_dims.extend(std::iter::repeat(f.head_hidden).take(f.head_layers));
        color_dims.push(3);
        let color_head = Mlp::new(reg, &format!("{name}.color"), &color_dims, rng);

        let scale = match f.attention_scale {
            AttentionScale::RsqrtDim => T::from_f64(1.0 / (f.d_attn as f64).sqrt()),
            AttentionScale::One => T::one(),
        };

        Self {
            triplane,
            point_mlp,
            w_q,
            w_k,
            w_v,
            density_head,
            color_head,
            bbox,
            d_attn: f.d_attn,
            d_v: f.d_v,
            geo_dim: f.geo_dim,
            dir_dim,
            attention: f.attention,
            scale,
            density_activation: f.density_activation,
        }
    }

    pub fn fx_dim(&self) -> usize {
        self.triplane.out_dim()
    }

    fn density_from_h0(&self, h0: T) -> T {
        match self.density_activation {
            DensityActivation::Softplus => softplus(h0),
            // Clamped exp so half-trained fields cannot overflow.
            DensityActivation::Exp => h0.min(T::from_f64(15.0)).exp(),
        }
    }

    fn density_grad_h0(&self, h0: T, sigma: T) -> T {
        match self.density_activation {
            DensityActivation::Softplus => sigmoid(h0),
            DensityActivation::Exp => {
                if h0 < T::from_f64(15.0) {
                    sigma
                } else {
                    T::zero()
                }
            }
        }
    }

    fn prepare_cache(&self, cache: &mut BranchRayCache<T>, m: usize) {
        let z = T::zero();
        cache.m = m;
        cache.xw.resize(m * 3, z);
        cache.fx.resize(m * self.fx_dim(), z);
        cache
            .queries
            .resize(m * 3 * self.triplane.n_levels(), PlaneQuery::default());
        cache.pm_in.resize(m * self.point_mlp.in_dim(), z);
        cache.pm_cache.resize(m * self.point_mlp.cache_len(), z);
        cache.x_feat.resize(m * self.d_v, z);
        cache.keys.resize(m * self.d_attn, z);
        cache.vals.resize(m * self.d_v, z);
        cache.q.resize(self.d_attn, z);
        cache.alpha.resize(m, z);
        cache.pooled.resize(self.d_v, z);
        cache.attended.resize(m * self.d_v, z);
        cache.dh_cache.resize(m * self.density_head.cache_len(), z);
        cache.h.resize(m * (1 + self.geo_dim), z);
        cache.sigma.resize(m, z);
        cache.ch_in.resize(m * self.color_head.in_dim(), z);
        cache.ch_cache.resize(m * self.color_head.cache_len(), z);
        cache.color.resize(m * 3, z);
    }

    pub fn prepare_scratch(&self, s: &mut BranchScratch<T>, n_max: usize) {
        let z = T::zero();
        let mlp_len = self
            .point_mlp
            .scratch_len()
            .max(self.density_head.scratch_len())
            .max(self.color_head.scratch_len());
        s.mlp.resize(mlp_len, z);
        s.d_attended.resize(n_max * self.d_v, z);
        s.d_vals.resize(n_max * self.d_v, z);
        s.d_keys.resize(n_max * self.d_attn, z);
        s.dq.resize(self.d_attn, z);
        s.dh.resize(1 + self.geo_dim, z);
        s.d_ch_in.resize(self.color_head.in_dim(), z);
        s.d_x_feat.resize(self.d_v, z);
        s.d_pm_in.resize(self.point_mlp.in_dim(), z);
    }

    /// Evaluate all samples of one ray that fall inside this branch's box.
    ///
    /// `xs` are world positions along the ray; `d_cond` the frame condition
    /// vector; `a_vec` the lifted audio query input; `dir_enc` the encoded
    /// view direction (constant per ray).
    pub fn forward_ray(
        &self,
        xs: &[[f64; 3]],
        d_cond: &[T],
        a_vec: &[T],
        dir_enc: &[T],
        cache: &mut BranchRayCache<T>,
    ) {
        cache.sel.clear();
        for (i, x) in xs.iter().enumerate() {
            if self.bbox.contains(*x) {
                cache.sel.push(i);
            }
        }
        let m = cache.sel.len();
        self.prepare_cache(cache, m);
        if m == 0 {
            return;
        }

        let fx_dim = self.fx_dim();
        let nl3 = 3 * self.triplane.n_levels();
        let pm_in_dim = self.point_mlp.in_dim();
        let pm_cache_len = self.point_mlp.cache_len();
        let d_cond_len = d_cond.len();

        for j in 0..m {
            let x = xs[cache.sel[j]];
            let local = self.bbox.to_local::<T>(x);
            for k in 0..3 {
                cache.xw[j * 3 + k] = T::from_f64(x[k]);
            }
            self.triplane.encode(
                local,
                &mut cache.fx[j * fx_dim..(j + 1) * fx_dim],
                &mut cache.queries[j * nl3..(j + 1) * nl3],
            );
            let pm_in = &mut cache.pm_in[j * pm_in_dim..(j + 1) * pm_in_dim];
            pm_in[..fx_dim].copy_from_slice(&cache.fx[j * fx_dim..(j + 1) * fx_dim]);
            pm_in[fx_dim..fx_dim + d_cond_len].copy_from_slice(d_cond);
            self.point_mlp.forward(
                &cache.pm_in[j * pm_in_dim..(j + 1) * pm_in_dim],
                &mut cache.pm_cache[j * pm_cache_len..(j + 1) * pm_cache_len],
                &mut cache.x_feat[j * self.d_v..(j + 1) * self.d_v],
            );
            self.w_k.forward(
                &cache.xw[j * 3..(j + 1) * 3],
                &mut cache.keys[j * self.d_attn..(j + 1) * self.d_attn],
            );
            self.w_v.forward(
                &cache.x_feat[j * self.d_v..(j + 1) * self.d_v],
                &mut cache.vals[j * self.d_v..(j + 1) * self.d_v],
            );
        }

        match self.attention {
            AttentionMode::Softmax => {
                self.w_q.forward(a_vec, &mut cache.q);
                attend_forward(
                    &cache.q,
                    &cache.keys,
                    &cache.vals,
                    self.scale,
                    &mut cache.alpha,
                    &mut cache.pooled,
                    &mut cache.attended,
                )
                .expect("m > 0 checked above");
            }
            AttentionMode::None => {
                cache.attended.copy_from_slice(&cache.vals);
            }
        }

        let h_dim = 1 + self.geo_dim;
        let dh_len = self.density_head.cache_len();
        let ch_in_dim = self.color_head.in_dim();
        let ch_len = self.color_head.cache_len();
        for j in 0..m {
            self.density_head.forward(
                &cache.attended[j * self.d_v..(j + 1) * self.d_v],
                &mut cache.dh_cache[j * dh_len..(j + 1) * dh_len],
                &mut cache.h[j * h_dim..(j + 1) * h_dim],
            );
            cache.sigma[j] = self.density_from_h0(cache.h[j * h_dim]);
            let ch_in = &mut cache.ch_in[j * ch_in_dim..(j + 1) * ch_in_dim];
            ch_in[..self.geo_dim]
                .copy_from_slice(&cache.h[j * h_dim + 1..(j + 1) * h_dim]);
            ch_in[self.geo_dim..].copy_from_slice(dir_enc);
            let mut c_pre = [T::zero(); 3];
            self.color_head.forward(
                &cache.ch_in[j * ch_in_dim..(j + 1) * ch_in_dim],
                &mut cache.ch_cache[j * ch_len..(j + 1) * ch_len],
                &mut c_pre,
            );
            for k in 0..3 {
                cache.color[j * 3 + k] = sigmoid(c_pre[k]);
            }
        }
    }

    /// Reverse pass for one ray. `d_sigma` (len m) and `d_color` (m*3) are
    /// ordered like `cache.sel`; condition gradients accumulate into
    /// `d_cond_accum`.
    pub fn backward_ray(
        &self,
        a_vec: &[T],
        cache: &BranchRayCache<T>,
        d_sigma: &[T],
        d_color: &[T],
        d_cond_accum: &mut [T],
        s: &mut BranchScratch<T>,
        g: &mut GradSink<T>,
    ) {
        let m = cache.m;
        if m == 0 {
            return;
        }
        let h_dim = 1 + self.geo_dim;
        let dh_len = self.density_head.cache_len();
        let ch_in_dim = self.color_head.in_dim();
        let ch_len = self.color_head.cache_len();
        let fx_dim = self.fx_dim();
        let pm_in_dim = self.point_mlp.in_dim();
        let pm_cache_len = self.point_mlp.cache_len();
        let nl3 = 3 * self.triplane.n_levels();

        // Heads first: color then density, filling d_attended per sample.
        for j in 0..m {
            for k in 0..3 {
                let c = cache.color[j * 3 + k];
                s.dc_pre[k] = d_color[j * 3 + k] * sigmoid_grad_from_output(c);
            }
            let (dc_pre, d_ch_in, mlp_scratch) = (&s.dc_pre, &mut s.d_ch_in, &mut s.mlp);
            self.color_head.backward(
                &cache.ch_in[j * ch_in_dim..(j + 1) * ch_in_dim],
                &cache.ch_cache[j * ch_len..(j + 1) * ch_len],
                &dc_pre[..],
                Some(d_ch_in),
                mlp_scratch,
                g,
            );
            let h0 = cache.h[j * h_dim];
            s.dh[0] = d_sigma[j] * self.density_grad_h0(h0, cache.sigma[j]);
            let (dh, d_ch_in) = (&mut s.dh, &s.d_ch_in);
            dh[1..].copy_from_slice(&d_ch_in[..self.geo_dim]);
            let (dh, d_attended, mlp_scratch) = (&s.dh, &mut s.d_attended, &mut s.mlp);
            self.density_head.backward(
                &cache.attended[j * self.d_v..(j + 1) * self.d_v],
                &cache.dh_cache[j * dh_len..(j + 1) * dh_len],
                dh,
                Some(&mut d_attended[j * self.d_v..(j + 1) * self.d_v]),
                mlp_scratch,
                g,
            );
        }

        // Attention couples samples within the ray.
        match self.attention {
            AttentionMode::Softmax => {
                attend_backward(
                    &cache.q,
                    &cache.keys,
                    &cache.vals,
                    self.scale,
                    &cache.alpha,
                    &s.d_attended[..m * self.d_v],
                    &mut s.dq,
                    &mut s.d_keys[..m * self.d_attn],
                    &mut s.d_vals[..m * self.d_v],
                );
                self.w_q.backward(a_vec, &s.dq, None, g);
                for j in 0..m {
                    self.w_k.backward(
                        &cache.xw[j * 3..(j + 1) * 3],
                        &s.d_keys[j * self.d_attn..(j + 1) * self.d_attn],
                        None,
                        g,
                    );
                }
            }
            AttentionMode::None => {
                s.d_vals[..m * self.d_v].copy_from_slice(&s.d_attended[..m * self.d_v]);
            }
        }

        for j in 0..m {
            let (d_vals, d_x_feat) = (&s.d_vals, &mut s.d_x_feat);
            self.w_v.backward(
                &cache.x_feat[j * self.d_v..(j + 1) * self.d_v],
                &d_vals[j * self.d_v..(j + 1) * self.d_v],
                Some(d_x_feat),
                g,
            );
            let (d_x_feat, d_pm_in, mlp_scratch) = (&s.d_x_feat, &mut s.d_pm_in, &mut s.mlp);
            self.point_mlp.backward(
                &cache.pm_in[j * pm_in_dim..(j + 1) * pm_in_dim],
                &cache.pm_cache[j * pm_cache_len..(j + 1) * pm_cache_len],
                d_x_feat,
                Some(d_pm_in),
                mlp_scratch,
                g,
            );
            self.triplane
                .backward(&cache.queries[j * nl3..(j + 1) * nl3], &s.d_pm_in[..fx_dim], g);
            for (acc, d) in d_cond_accum.iter_mut().zip(s.d_pm_in[fx_dim..].iter()) {
                *acc += *d;
            }
        }
    }

    pub fn tensors(&self) -> Vec<&ParamTensor<T>> {
        let mut v = self.triplane.tensors();
        v.extend(self.point_mlp.tensors());
        v.push(&self.w_q.w);
        v.push(&self.w_k.w);
        v.push(&self.w_v.w);
        v.extend(self.density_head.tensors());
        v.extend(self.color_head.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut v = self.triplane.tensors_mut();
        v.extend(self.point_mlp.tensors_mut());
        v.push(&mut self.w_q.w);
        v.push(&mut self.w_k.w);
        v.push(&mut self.w_v.w);
        v.extend(self.density_head.tensors_mut());
        v.extend(self.color_head.tensors_mut());
        v
    }
}
