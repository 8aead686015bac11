//! Ray and image rendering over the dual-branch field.
//!
//! The training path keeps every intermediate in a reusable [`RayScratch`]
//! so one worker renders and backpropagates thousands of rays without
//! allocating.

use rayon::prelude::*;

use rand_chacha::ChaCha8Rng;

use crate::config::{ComposeMode, FusionMode, RunConfig};
use crate::diffcore::GradSink;
use crate::encoders::freq::frequency_encode;
use crate::field::{BranchRayCache, BranchScratch, ConditionCache, FieldModel};
use crate::real::Real;

use super::camera::{Camera, Ray};
use super::composite::{composite, composite_backward};
use super::fuse::{
    fuse_point, fuse_point_backward, fuse_point_raw_sum, fuse_raw_sum_backward,
};
use super::sampling::{deltas_from_ts, sample_ts};

#[derive(Debug, Clone)]
pub struct RenderSettings<T: Real> {
    pub n_samples: usize,
    pub fusion: FusionMode,
    pub compose: ComposeMode,
    pub background: [T; 3],
}

impl<T: Real> RenderSettings<T> {
    pub fn from_config(cfg: &RunConfig, train: bool) -> Self {
        let r = &cfg.renderer;
        Self {
            n_samples: if train { r.train_samples } else { r.eval_samples },
            fusion: r.fusion,
            compose: r.compose,
            background: [
                T::from_f64(r.background[0]),
                T::from_f64(r.background[1]),
                T::from_f64(r.background[2]),
            ],
        }
    }
}

/// Per-frame conditioning scalars.
#[derive(Debug, Clone, Copy)]
pub struct FrameCond {
    pub audio: f64,
    pub blink: f64,
}

/// Reusable per-worker state for one ray's forward and backward pass.
#[derive(Debug, Clone, Default)]
pub struct RayScratch<T: Real> {
    pub ts: Vec<f64>,
    pub deltas: Vec<T>,
    pub xs: Vec<[f64; 3]>,
    pub cond_cache: ConditionCache<T>,
    pub a_vec: Vec<T>,
    pub dir_enc: Vec<T>,
    pub mouth: BranchRayCache<T>,
    pub face: BranchRayCache<T>,
    pub fused_sigma: Vec<T>,
    pub fused_color: Vec<T>,
    pub weights: Vec<T>,
    pub t_final: T,
    pub rgb: [T; 3],
    // Backward buffers.
    d_fused_sigma: Vec<T>,
    d_fused_color: Vec<T>,
    d_sigma_m: Vec<T>,
    d_color_m: Vec<T>,
    d_sigma_f: Vec<T>,
    d_color_f: Vec<T>,
    d_cond: Vec<T>,
    t_buf: Vec<T>,
    bscratch: BranchScratch<T>,
    cond_scratch: Vec<T>,
}

/// Render one ray with full caches retained for a later backward pass.
pub fn render_ray<T: Real>(
    model: &FieldModel<T>,
    ray: &Ray,
    frame: &FrameCond,
    st: &RenderSettings<T>,
    rng: Option<&mut ChaCha8Rng>,
    s: &mut RayScratch<T>,
) -> [T; 3] {
    let n = st.n_samples;
    sample_ts(&mut s.ts, ray.t_near, ray.t_far, n, rng);
    deltas_from_ts(&s.ts, ray.t_far, &mut s.deltas);
    s.xs.clear();
    for &t in &s.ts {
        s.xs.push([
            ray.origin[0] + t * ray.dir[0],
            ray.origin[1] + t * ray.dir[1],
            ray.origin[2] + t * ray.dir[2],
        ]);
    }

    model.cond.forward(
        T::from_f64(frame.audio),
        T::from_f64(frame.blink),
        &mut s.cond_cache,
    );
    s.a_vec.resize(model.zero_audio_vec.len(), T::zero());
    frequency_encode(
        &[T::from_f64(frame.audio)],
        model.n_freqs_audio,
        &mut s.a_vec,
    );
    s.dir_enc.resize(model.dir_dim(), T::zero());
    let dir_t = [
        T::from_f64(ray.dir[0]),
        T::from_f64(ray.dir[1]),
        T::from_f64(ray.dir[2]),
    ];
    frequency_encode(&dir_t, model.n_freqs_dir, &mut s.dir_enc);

    let use_mouth = st.fusion != FusionMode::Off;
    if use_mouth {
        model
            .mouth
            .forward_ray(&s.xs, &s.cond_cache.d, &s.a_vec, &s.dir_enc, &mut s.mouth);
    } else {
        s.mouth.m = 0;
        s.mouth.sel.clear();
    }
    let face_a = model.face_audio_vec(&s.a_vec);
    model
        .face
        .forward_ray(&s.xs, &s.cond_cache.d, face_a, &s.dir_enc, &mut s.face);

    s.fused_sigma.resize(n, T::zero());
    s.fused_color.resize(n * 3, T::zero());
    s.weights.resize(n, T::zero());

    match st.compose {
        ComposeMode::Fused => {
            fuse_samples(st.fusion, n, &s.mouth, &s.face, &mut s.fused_sigma, &mut s.fused_color);
            let (rgb, t_final) = composite(
                &s.fused_sigma,
                &s.fused_color,
                &s.deltas,
                st.background,
                &mut s.weights,
            );
            s.rgb = rgb;
            s.t_final = t_final;
        }
        ComposeMode::PerBranch => {
            // Literal reading: composite each branch, then add the images.
            scatter_branch(n, &s.face, &mut s.fused_sigma, &mut s.fused_color);
            let (rgb_f, t_final) = composite(
                &s.fused_sigma,
                &s.fused_color,
                &s.deltas,
                st.background,
                &mut s.weights,
            );
            let mut rgb = rgb_f;
            if use_mouth {
                scatter_branch(n, &s.mouth, &mut s.fused_sigma, &mut s.fused_color);
                let (rgb_m, _) = composite(
                    &s.fused_sigma,
                    &s.fused_color,
                    &s.deltas,
                    [T::zero(); 3],
                    &mut s.weights,
                );
                for k in 0..3 {
                    rgb[k] += rgb_m[k];
                }
            }
            s.rgb = rgb;
            s.t_final = t_final;
        }
    }
    s.rgb
}

/// Scatter one branch's outputs over the full sample list (zeros elsewhere).
fn scatter_branch<T: Real>(
    n: usize,
    cache: &BranchRayCache<T>,
    sigma: &mut [T],
    color: &mut [T],
) {
    sigma.iter_mut().for_each(|v| *v = T::zero());
    color.iter_mut().for_each(|v| *v = T::zero());
    let _ = n;
    for (j, &i) in cache.sel.iter().enumerate() {
        sigma[i] = cache.sigma[j];
        color[i * 3..i * 3 + 3].copy_from_slice(&cache.color[j * 3..j * 3 + 3]);
    }
}

fn fuse_samples<T: Real>(
    fusion: FusionMode,
    n: usize,
    mouth: &BranchRayCache<T>,
    face: &BranchRayCache<T>,
    fused_sigma: &mut [T],
    fused_color: &mut [T],
) {
    let zero3 = [T::zero(); 3];
    let mut mp = 0usize;
    let mut fp = 0usize;
    for i in 0..n {
        let (s1, c1) = if mp < mouth.sel.len() && mouth.sel[mp] == i {
            let j = mp;
            mp += 1;
            (
                mouth.sigma[j],
                [
                    mouth.color[j * 3],
                    mouth.color[j * 3 + 1],
                    mouth.color[j * 3 + 2],
                ],
            )
        } else {
            (T::zero(), zero3)
        };
        let (s2, c2) = if fp < face.sel.len() && face.sel[fp] == i {
            let j = fp;
            fp += 1;
            (
                face.sigma[j],
                [
                    face.color[j * 3],
                    face.color[j * 3 + 1],
                    face.color[j * 3 + 2],
                ],
            )
        } else {
            (T::zero(), zero3)
        };
        let (sf, cf) = match fusion {
            FusionMode::Weighted => fuse_point(s1, c1, s2, c2),
            FusionMode::RawSum => fuse_point_raw_sum(s1, c1, s2, c2),
            FusionMode::Off => (s2, c2),
        };
        fused_sigma[i] = sf;
        fused_color[i * 3..i * 3 + 3].copy_from_slice(&cf);
    }
}

/// Reverse pass for the last ray rendered into `s` (Fused compose only).
pub fn render_ray_backward<T: Real>(
    model: &FieldModel<T>,
    st: &RenderSettings<T>,
    s: &mut RayScratch<T>,
    d_rgb: [T; 3],
    g: &mut GradSink<T>,
) {
    assert_eq!(
        st.compose,
        ComposeMode::Fused,
        "training requires the fused compositing pass"
    );
    let n = st.n_samples;
    s.d_fused_sigma.resize(n, T::zero());
    s.d_fused_color.resize(n * 3, T::zero());
    s.t_buf.resize(n, T::zero());
    composite_backward(
        &s.fused_sigma,
        &s.fused_color,
        &s.deltas,
        st.background,
        &s.weights,
        s.t_final,
        d_rgb,
        &mut s.d_fused_sigma,
        &mut s.d_fused_color,
        &mut s.t_buf,
    );

    // Unfuse per sample back into per-branch gradients.
    let use_mouth = st.fusion != FusionMode::Off;
    s.d_sigma_m.resize(s.mouth.m, T::zero());
    s.d_color_m.resize(s.mouth.m * 3, T::zero());
    s.d_sigma_f.resize(s.face.m, T::zero());
    s.d_color_f.resize(s.face.m * 3, T::zero());

    let zero3 = [T::zero(); 3];
    let mut mp = 0usize;
    let mut fp = 0usize;
    for i in 0..n {
        let m_here = mp < s.mouth.sel.len() && s.mouth.sel[mp] == i;
        let f_here = fp < s.face.sel.len() && s.face.sel[fp] == i;
        let (s1, c1) = if m_here {
            (
                s.mouth.sigma[mp],
                [
                    s.mouth.color[mp * 3],
                    s.mouth.color[mp * 3 + 1],
                    s.mouth.color[mp * 3 + 2],
                ],
            )
        } else {
            (T::zero(), zero3)
        };
        let (s2, c2) = if f_here {
            (
                s.face.sigma[fp],
                [
                    s.face.color[fp * 3],
                    s.face.color[fp * 3 + 1],
                    s.face.color[fp * 3 + 2],
                ],
            )
        } else {
            (T::zero(), zero3)
        };
        let dsig = s.d_fused_sigma[i];
        let dcol = [
            s.d_fused_color[i * 3],
            s.d_fused_color[i * 3 + 1],
            s.d_fused_color[i * 3 + 2],
        ];
        let (ds1, dc1, ds2, dc2) = match st.fusion {
            FusionMode::Weighted => fuse_point_backward(s1, c1, s2, c2, dsig, dcol),
            FusionMode::RawSum => fuse_raw_sum_backward(dsig, dcol),
            FusionMode::Off => (T::zero(), zero3, dsig, dcol),
        };
        if m_here {
            s.d_sigma_m[mp] = ds1;
            s.d_color_m[mp * 3..mp * 3 + 3].copy_from_slice(&dc1);
            mp += 1;
        }
        if f_here {
            s.d_sigma_f[fp] = ds2;
            s.d_color_f[fp * 3..fp * 3 + 3].copy_from_slice(&dc2);
            fp += 1;
        }
    }

    s.d_cond.resize(model.cond_width(), T::zero());
    s.d_cond.iter_mut().for_each(|v| *v = T::zero());
    if use_mouth && s.mouth.m > 0 {
        model.mouth.prepare_scratch(&mut s.bscratch, s.mouth.m);
        model.mouth.backward_ray(
            &s.a_vec,
            &s.mouth,
            &s.d_sigma_m,
            &s.d_color_m,
            &mut s.d_cond,
            &mut s.bscratch,
            g,
        );
    }
    if s.face.m > 0 {
        model.face.prepare_scratch(&mut s.bscratch, s.face.m);
        let face_a = model.face_audio_vec(&s.a_vec);
        model.face.backward_ray(
            face_a,
            &s.face,
            &s.d_sigma_f,
            &s.d_color_f,
            &mut s.d_cond,
            &mut s.bscratch,
            g,
        );
    }
    s.cond_scratch.resize(model.cond.mlp.scratch_len(), T::zero());
    model
        .cond
        .backward(&s.cond_cache, &s.d_cond, &mut s.cond_scratch, g);
}

/// Render one pixel at eval quality (midpoint samples, no gradients).
/// Background rays return the background color without field evaluation.
pub fn render_pixel<T: Real>(
    model: &FieldModel<T>,
    camera: &Camera,
    px: usize,
    py: usize,
    frame: &FrameCond,
    st: &RenderSettings<T>,
    s: &mut RayScratch<T>,
) -> [T; 3] {
    match camera.generate_ray(px, py) {
        None => st.background,
        Some(ray) => render_ray(model, &ray, frame, st, None, s),
    }
}

/// Render a full frame, rows in parallel. Returns row-major RGB.
pub fn render_image<T: Real>(
    model: &FieldModel<T>,
    camera: &Camera,
    frame: &FrameCond,
    st: &RenderSettings<T>,
) -> Vec<T> {
    let (w, h) = (camera.width, camera.height);
    let mut img = vec![T::zero(); w * h * 3];
    img.par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(py, row)| {
            let mut scratch = RayScratch::default();
            for px in 0..w {
                let rgb = render_pixel(model, camera, px, py, frame, st, &mut scratch);
                row[px * 3..px * 3 + 3].copy_from_slice(&rgb);
            }
        });
    img
}

/// Composite an analytic field along a pixel ray, bypassing the networks.
/// Shares the renderer's sampling and compositing exactly.
pub fn render_field_ray(
    field: &(impl Fn([f64; 3]) -> (f64, [f64; 3]) + Sync),
    ray: &Ray,
    n_samples: usize,
    background: [f64; 3],
) -> [f64; 3] {
    let mut ts = Vec::with_capacity(n_samples);
    sample_ts(&mut ts, ray.t_near, ray.t_far, n_samples, None);
    let mut deltas: Vec<f64> = Vec::with_capacity(n_samples);
    deltas_from_ts(&ts, ray.t_far, &mut deltas);
    let mut sigma = Vec::with_capacity(n_samples);
    let mut colors = Vec::with_capacity(n_samples * 3);
    for &t in &ts {
        let p = [
            ray.origin[0] + t * ray.dir[0],
            ray.origin[1] + t * ray.dir[1],
            ray.origin[2] + t * ray.dir[2],
        ];
        let (s, c) = field(p);
        sigma.push(s);
        colors.extend_from_slice(&c);
    }
    let mut weights = vec![0.0; n_samples];
    let (rgb, _) = composite(&sigma, &colors, &deltas, background, &mut weights);
    rgb
}

/// Full-frame analytic-field render (the oracle-agreement harness).
pub fn render_field_image(
    field: &(impl Fn([f64; 3]) -> (f64, [f64; 3]) + Sync),
    camera: &Camera,
    n_samples: usize,
    background: [f64; 3],
) -> Vec<f64> {
    let (w, h) = (camera.width, camera.height);
    let mut img = vec![0.0; w * h * 3];
    img.par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(py, row)| {
            for px in 0..w {
                let rgb = match camera.generate_ray(px, py) {
                    None => background,
                    Some(ray) => render_field_ray(field, &ray, n_samples, background),
                };
                row[px * 3..px * 3 + 3].copy_from_slice(&rgb);
            }
        });
    img
}
