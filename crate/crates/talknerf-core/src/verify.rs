//! Registered gradient checks over every parameterized operation.
//!
//! Each check builds a small double-precision model under a fixed seed,
//! flattens a tensor subset into one parameter vector, and compares the
//! hand-derived gradients against central finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::diffcore::{
    gradcheck_fn, GradCheckReport, GradCheckSettings, GradSink, Linear, ParamRegistry,
};
use crate::encoders::hash::PlaneQuery;
use crate::field::FieldModel;
use crate::geom::Aabb;
use crate::real::{dot, sigmoid, sigmoid_grad_from_output, softplus};
use crate::renderer::{
    render_ray, render_ray_backward, FrameCond, Ray, RayScratch, RenderSettings,
};
use crate::trainer::loss::{coarse_loss, coarse_loss_backward, fine_loss, fine_loss_backward};

/// Small model sizes used by the verification ops.
fn check_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seed = 2024;
    cfg.encoder.n_levels = 4;
    cfg.encoder.base_resolution = 4;
    cfg.encoder.per_level_scale = 2.0;
    cfg.encoder.log2_table_size = 8;
    cfg.condition.n_freqs_audio = 4;
    cfg.condition.n_freqs_blink = 3;
    cfg.condition.hidden = 12;
    cfg.condition.width = 8;
    cfg.field.d_attn = 12;
    cfg.field.d_v = 12;
    cfg.field.geo_dim = 7;
    cfg.field.point_hidden = 16;
    cfg.field.head_hidden = 16;
    cfg.field.head_layers = 1;
    cfg.field.n_freqs_dir = 2;
    cfg.renderer.train_samples = 24;
    cfg
}

fn mouth_box() -> Aabb {
    Aabb {
        min: [0.4, 0.3, 0.6],
        max: [0.62, 0.51, 0.76],
    }
}

fn model_f64() -> FieldModel<f64> {
    FieldModel::new(&check_config(), mouth_box())
}

fn flat_get(model: &FieldModel<f64>, ids: &[usize]) -> Vec<f64> {
    let tensors = model.tensors();
    let mut out = Vec::new();
    for &id in ids {
        out.extend_from_slice(&tensors[id].values);
    }
    out
}

fn flat_set(model: &mut FieldModel<f64>, ids: &[usize], x: &[f64]) {
    let mut tensors = model.tensors_mut();
    let mut off = 0;
    for &id in ids {
        let t = &mut tensors[id];
        let len = t.values.len();
        t.values.copy_from_slice(&x[off..off + len]);
        off += len;
    }
    assert_eq!(off, x.len());
}

fn flat_grads(sink: &GradSink<f64>, ids: &[usize]) -> Vec<f64> {
    let mut out = Vec::new();
    for &id in ids {
        out.extend_from_slice(sink.buf(id));
    }
    out
}

fn seeded_dirs(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// All registered op names, in execution order.
pub const OP_NAMES: [&str; 11] = [
    "linear_map",
    "plane_encode",
    "triplane_encode",
    "condition_mlp",
    "point_mlp",
    "attention_qkv",
    "density_head",
    "color_head",
    "branch_density",
    "render_ray",
    "losses",
];

/// Run one registered check by name.
pub fn run_gradcheck(op: &str, settings: &GradCheckSettings) -> GradCheckReport {
    match op {
        "linear_map" => check_linear(settings),
        "plane_encode" => check_plane_encode(settings),
        "triplane_encode" => check_triplane(settings),
        "condition_mlp" => check_condition(settings),
        "point_mlp" => check_point_mlp(settings),
        "attention_qkv" => check_attention(settings),
        "density_head" => check_heads("density_head", settings, true),
        "color_head" => check_heads("color_head", settings, false),
        "branch_density" => check_branch_density(settings),
        "render_ray" => check_render_ray(settings),
        "losses" => check_losses(settings),
        other => panic!("unknown gradcheck op '{other}'"),
    }
}

/// Run all checks, or those whose name contains `selector`.
pub fn run_gradchecks(
    selector: Option<&str>,
    settings: &GradCheckSettings,
) -> Vec<GradCheckReport> {
    OP_NAMES
        .iter()
        .filter(|n| selector.map_or(true, |s| n.contains(s)))
        .map(|n| run_gradcheck(n, settings))
        .collect()
}

fn check_linear(settings: &GradCheckSettings) -> GradCheckReport {
    let mut reg = ParamRegistry::new();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let layer: Linear<f64> = Linear::new(&mut reg, "lin", 16, 16, &mut rng);
    let x: Vec<f64> = (0..16).map(|i| (i as f64) * 0.11 - 0.8).collect();
    let x0: Vec<f64> = layer
        .w
        .values
        .iter()
        .chain(layer.b.values.iter())
        .copied()
        .collect();

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut l = layer.clone();
        l.w.values.copy_from_slice(&p[..256]);
        l.b.values.copy_from_slice(&p[256..]);
        let mut y = vec![0.0; 16];
        l.forward(&x, &mut y);
        let loss = y.iter().sum();
        if !want_grad {
            return (loss, Vec::new());
        }
        let tensors = [&l.w, &l.b];
        let mut sink = GradSink::zeros_like(&tensors);
        l.backward(&x, &vec![1.0; 16], None, &mut sink);
        let mut g = sink.buf(l.w.id).to_vec();
        g.extend_from_slice(sink.buf(l.b.id));
        (loss, g)
    };
    let run2 = run.clone();
    gradcheck_fn(
        "linear_map",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_plane_encode(settings: &GradCheckSettings) -> GradCheckReport {
    let model = model_f64();
    let plane_ids: Vec<usize> = model.mouth.triplane.planes[0]
        .levels
        .iter()
        .map(|t| t.id)
        .collect();
    let queries: Vec<(f64, f64)> = {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        (0..16).map(|_| (rng.gen(), rng.gen())).collect()
    };
    let dim = model.mouth.triplane.cfg().feature_dim();
    let dirs = seeded_dirs(16, dim, 78);
    let x0 = flat_get(&model, &plane_ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &plane_ids, p);
        let plane = &m.mouth.triplane.planes[0];
        let mut out = vec![0.0; dim];
        let mut qs = vec![PlaneQuery::default(); plane.cfg.n_levels];
        let mut loss = 0.0;
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        for (b, (u, v)) in queries.iter().enumerate() {
            plane.encode(*u, *v, &mut out, &mut qs);
            loss += dot(&out, &dirs[b]);
            if want_grad {
                plane.backward(&qs, &dirs[b], &mut sink);
            }
        }
        if !want_grad {
            return (loss, Vec::new());
        }
        (loss, flat_grads(&sink, &plane_ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        "plane_encode",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_triplane(settings: &GradCheckSettings) -> GradCheckReport {
    let model = model_f64();
    let ids: Vec<usize> = model.face.triplane.tensors().iter().map(|t| t.id).collect();
    let points: Vec<[f64; 3]> = {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        (0..8).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()
    };
    let dim = model.face.triplane.out_dim();
    let dirs = seeded_dirs(8, dim, 80);
    let x0 = flat_get(&model, &ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &ids, p);
        let tp = &m.face.triplane;
        let mut out = vec![0.0; dim];
        let mut qs = vec![PlaneQuery::default(); 3 * tp.n_levels()];
        let mut loss = 0.0;
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        for (b, pt) in points.iter().enumerate() {
            tp.encode(*pt, &mut out, &mut qs);
            loss += dot(&out, &dirs[b]);
            if want_grad {
                tp.backward(&qs, &dirs[b], &mut sink);
            }
        }
        if !want_grad {
            return (loss, Vec::new());
        }
        (loss, flat_grads(&sink, &ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        "triplane_encode",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_condition(settings: &GradCheckSettings) -> GradCheckReport {
    let model = model_f64();
    let ids: Vec<usize> = model.cond.tensors().iter().map(|t| t.id).collect();
    let dirs = seeded_dirs(4, model.cond_width(), 81);
    let inputs = [(0.3, 0.1), (-0.7, 0.9), (0.1, 0.6), (0.95, 0.45)];
    let x0 = flat_get(&model, &ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &ids, p);
        let mut loss = 0.0;
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        let mut cache = Default::default();
        let mut scratch = vec![0.0; m.cond.mlp.scratch_len()];
        for (b, (a, e)) in inputs.iter().enumerate() {
            m.cond.forward(*a, *e, &mut cache);
            loss += dot(&cache.d, &dirs[b]);
            if want_grad {
                m.cond.backward(&cache, &dirs[b], &mut scratch, &mut sink);
            }
        }
        if !want_grad {
            return (loss, Vec::new());
        }
        (loss, flat_grads(&sink, &ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        "condition_mlp",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_point_mlp(settings: &GradCheckSettings) -> GradCheckReport {
    let model = model_f64();
    let ids: Vec<usize> = model.face.point_mlp.tensors().iter().map(|t| t.id).collect();
    let in_dim = model.face.point_mlp.in_dim();
    let out_dim = model.face.point_mlp.out_dim();
    let inputs = seeded_dirs(6, in_dim, 82);
    let dirs = seeded_dirs(6, out_dim, 83);
    let x0 = flat_get(&model, &ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &ids, p);
        let mlp = &m.face.point_mlp;
        let mut cache = vec![0.0; mlp.cache_len()];
        let mut y = vec![0.0; out_dim];
        let mut scratch = vec![0.0; mlp.scratch_len()];
        let mut loss = 0.0;
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        for (b, x) in inputs.iter().enumerate() {
            mlp.forward(x, &mut cache, &mut y);
            loss += dot(&y, &dirs[b]);
            if want_grad {
                mlp.backward(x, &cache, &dirs[b], None, &mut scratch, &mut sink);
            }
        }
        if !want_grad {
            return (loss, Vec::new());
        }
        (loss, flat_grads(&sink, &ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        "point_mlp",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_attention(settings: &GradCheckSettings) -> GradCheckReport {
    use crate::field::{attend_backward, attend_forward};
    let model = model_f64();
    let ids = [
        model.mouth.w_q.w.id,
        model.mouth.w_k.w.id,
        model.mouth.w_v.w.id,
    ];
    let (d_attn, d_v) = (model.mouth.d_attn, model.mouth.d_v);
    let scale = model.mouth.scale;
    let m_samples = 6usize;
    let a_vec: Vec<f64> = seeded_dirs(1, model.mouth.w_q.d_in, 84).pop().unwrap();
    let xs = seeded_dirs(m_samples, 3, 85);
    let feats = seeded_dirs(m_samples, d_v, 86);
    let dirs = seeded_dirs(m_samples, d_v, 87);
    let x0 = flat_get(&model, &ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &ids, p);
        let br = &m.mouth;
        let mut q = vec![0.0; d_attn];
        br.w_q.forward(&a_vec, &mut q);
        let mut keys = vec![0.0; m_samples * d_attn];
        let mut vals = vec![0.0; m_samples * d_v];
        for j in 0..m_samples {
            br.w_k
                .forward(&xs[j], &mut keys[j * d_attn..(j + 1) * d_attn]);
            br.w_v.forward(&feats[j], &mut vals[j * d_v..(j + 1) * d_v]);
        }
        let mut alpha = vec![0.0; m_samples];
        let mut pooled = vec![0.0; d_v];
        let mut out = vec![0.0; m_samples * d_v];
        attend_forward(&q, &keys, &vals, scale, &mut alpha, &mut pooled, &mut out).unwrap();
        let mut loss = 0.0;
        let mut d_out = vec![0.0; m_samples * d_v];
        for j in 0..m_samples {
            loss += dot(&out[j * d_v..(j + 1) * d_v], &dirs[j]);
            d_out[j * d_v..(j + 1) * d_v].copy_from_slice(&dirs[j]);
        }
        if !want_grad {
            return (loss, Vec::new());
        }
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        let mut dq = vec![0.0; d_attn];
        let mut dkeys = vec![0.0; m_samples * d_attn];
        let mut dvals = vec![0.0; m_samples * d_v];
        attend_backward(
            &q, &keys, &vals, scale, &alpha, &d_out, &mut dq, &mut dkeys, &mut dvals,
        );
        br.w_q.backward(&a_vec, &dq, None, &mut sink);
        for j in 0..m_samples {
            br.w_k
                .backward(&xs[j], &dkeys[j * d_attn..(j + 1) * d_attn], None, &mut sink);
            br.w_v
                .backward(&feats[j], &dvals[j * d_v..(j + 1) * d_v], None, &mut sink);
        }
        (loss, flat_grads(&sink, &ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        "attention_qkv",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn head_loss(
    model: &FieldModel<f64>,
    attended: &[f64],
    dir_enc: &[f64],
    r: &[f64],
    want_grad: bool,
    sink: &mut GradSink<f64>,
) -> f64 {
    let br = &model.face;
    let geo = br.geo_dim;
    let mut dcache = vec![0.0; br.density_head.cache_len()];
    let mut h = vec![0.0; 1 + geo];
    br.density_head.forward(attended, &mut dcache, &mut h);
    let sigma = softplus(h[0]);
    let mut ch_in = vec![0.0; br.color_head.in_dim()];
    ch_in[..geo].copy_from_slice(&h[1..]);
    ch_in[geo..].copy_from_slice(dir_enc);
    let mut ccache = vec![0.0; br.color_head.cache_len()];
    let mut c_pre = vec![0.0; 3];
    br.color_head.forward(&ch_in, &mut ccache, &mut c_pre);
    let c: Vec<f64> = c_pre.iter().map(|v| sigmoid(*v)).collect();
    let loss = sigma + dot(&c, r);
    if !want_grad {
        return loss;
    }
    let mut scratch =
        vec![0.0; br.color_head.scratch_len().max(br.density_head.scratch_len())];
    let dc_pre: Vec<f64> = (0..3)
        .map(|k| r[k] * sigmoid_grad_from_output(c[k]))
        .collect();
    let mut d_ch_in = vec![0.0; br.color_head.in_dim()];
    br.color_head
        .backward(&ch_in, &ccache, &dc_pre, Some(&mut d_ch_in), &mut scratch, sink);
    let mut dh = vec![0.0; 1 + geo];
    dh[0] = sigmoid(h[0]);
    dh[1..].copy_from_slice(&d_ch_in[..geo]);
    br.density_head
        .backward(attended, &dcache, &dh, None, &mut scratch, sink);
    loss
}

fn check_heads(name: &str, settings: &GradCheckSettings, density: bool) -> GradCheckReport {
    let model = model_f64();
    let ids: Vec<usize> = if density {
        model
            .face
            .density_head
            .tensors()
            .iter()
            .map(|t| t.id)
            .collect()
    } else {
        model
            .face
            .color_head
            .tensors()
            .iter()
            .map(|t| t.id)
            .collect()
    };
    let attended: Vec<f64> = seeded_dirs(1, model.face.d_v, 88).pop().unwrap();
    let dir_enc: Vec<f64> = seeded_dirs(1, model.face.dir_dim, 89).pop().unwrap();
    let r = [0.8, -0.4, 0.55];
    let x0 = flat_get(&model, &ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &ids, p);
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        let loss = head_loss(&m, &attended, &dir_enc, &r, want_grad, &mut sink);
        if !want_grad {
            return (loss, Vec::new());
        }
        (loss, flat_grads(&sink, &ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        name,
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_branch_density(settings: &GradCheckSettings) -> GradCheckReport {
    // Full mouth-branch density output w.r.t. its hash-table entries.
    let model = model_f64();
    let ids: Vec<usize> = model
        .mouth
        .triplane
        .tensors()
        .iter()
        .map(|t| t.id)
        .collect();
    let bb = mouth_box();
    let xs: Vec<[f64; 3]> = (0..8)
        .map(|i| {
            let t = 0.08 + 0.84 * i as f64 / 7.0;
            [
                bb.min[0] + t * (bb.max[0] - bb.min[0]),
                bb.min[1] + (1.0 - t) * (bb.max[1] - bb.min[1]),
                bb.min[2] + t * (bb.max[2] - bb.min[2]),
            ]
        })
        .collect();
    let x0 = flat_get(&model, &ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &ids, p);
        let a_vec = m.audio_vec(0.4);
        let d_cond: Vec<f64> = seeded_dirs(1, m.cond_width(), 90).pop().unwrap();
        let dir_enc: Vec<f64> = seeded_dirs(1, m.dir_dim(), 91).pop().unwrap();
        let mut cache = Default::default();
        m.mouth
            .forward_ray(&xs, &d_cond, &a_vec, &dir_enc, &mut cache);
        assert_eq!(cache.m, xs.len(), "all probe points must lie in the box");
        let loss = cache.sigma.iter().sum();
        if !want_grad {
            return (loss, Vec::new());
        }
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        let mut scratch = Default::default();
        m.mouth.prepare_scratch(&mut scratch, cache.m);
        let d_sigma = vec![1.0; cache.m];
        let d_color = vec![0.0; cache.m * 3];
        let mut d_cond_acc = vec![0.0; m.cond_width()];
        m.mouth.backward_ray(
            &a_vec,
            &cache,
            &d_sigma,
            &d_color,
            &mut d_cond_acc,
            &mut scratch,
            &mut sink,
        );
        (loss, flat_grads(&sink, &ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        "branch_density",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_render_ray(settings: &GradCheckSettings) -> GradCheckReport {
    // Loss through a full two-branch ray render, all parameters eligible.
    let model = model_f64();
    let ids: Vec<usize> = (0..model.n_tensors()).collect();
    let dir = {
        let d = [0.0f64, -0.05, -1.0];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        [d[0] / n, d[1] / n, d[2] / n]
    };
    let ray = Ray {
        origin: [0.5, 0.47, 1.9],
        dir,
        t_near: 0.9,
        t_far: 1.9,
    };
    let frame = FrameCond {
        audio: 0.55,
        blink: 0.2,
    };
    let st = RenderSettings::<f64>::from_config(&check_config(), true);
    let r = [1.0, -0.6, 0.3];
    let x0 = flat_get(&model, &ids);

    let run = move |p: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut m = model.clone();
        flat_set(&mut m, &ids, p);
        let mut scratch = RayScratch::default();
        let rgb = render_ray(&m, &ray, &frame, &st, None, &mut scratch);
        let loss = dot(&rgb, &r);
        if !want_grad {
            return (loss, Vec::new());
        }
        let tensors = m.tensors();
        let mut sink = GradSink::zeros_like(&tensors);
        render_ray_backward(&m, &st, &mut scratch, r, &mut sink);
        (loss, flat_grads(&sink, &ids))
    };
    let run2 = run.clone();
    gradcheck_fn(
        "render_ray",
        &x0,
        move |p| run(p, true),
        move |p| run2(p, false).0,
        settings,
    )
}

fn check_losses(settings: &GradCheckSettings) -> GradCheckReport {
    // Loss formulas differentiated w.r.t. the predictions themselves:
    // a coarse batch plus a fine patch concatenated into one vector.
    use crate::config::PerceptualSurrogate;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(92);
    let n_coarse = 40usize;
    let (pw, ph) = (8usize, 8usize);
    let gt_coarse: Vec<f64> = (0..n_coarse * 3).map(|_| rng.gen()).collect();
    let gt_patch: Vec<f64> = (0..pw * ph * 3).map(|_| rng.gen()).collect();
    let face: Vec<bool> = (0..n_coarse).map(|i| i % 5 != 4).collect();
    let mouth: Vec<bool> = (0..n_coarse).map(|i| i % 3 == 0).collect();
    let x0: Vec<f64> = (0..(n_coarse + pw * ph) * 3).map(|_| rng.gen()).collect();
    let lambda = 0.001;

    let fc = face.clone();
    let mc = mouth.clone();
    let gc = gt_coarse.clone();
    let gp = gt_patch.clone();
    let loss_of = move |x: &[f64]| -> f64 {
        let (pc, pp) = x.split_at(n_coarse * 3);
        coarse_loss(pc, &gc, &fc, &mc, lambda).unwrap()
            + fine_loss(pp, &gp, pw, ph, lambda, PerceptualSurrogate::PyramidMse)
    };
    let loss_of2 = loss_of.clone();
    gradcheck_fn(
        "losses",
        &x0,
        move |x| {
            let (pc, pp) = x.split_at(n_coarse * 3);
            let mut d = vec![0.0; x.len()];
            {
                let (dc, dp) = d.split_at_mut(n_coarse * 3);
                coarse_loss_backward(pc, &gt_coarse, &face, &mouth, lambda, dc);
                fine_loss_backward(
                    pp,
                    &gt_patch,
                    pw,
                    ph,
                    lambda,
                    PerceptualSurrogate::PyramidMse,
                    dp,
                );
            }
            (loss_of(x), d)
        },
        move |x| loss_of2(x),
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_ops_pass_loosely() {
        // Full-strength runs live in the acceptance suite; here a reduced
        // sample budget guards against gross regressions.
        let settings = GradCheckSettings {
            n_samples: 40,
            ..Default::default()
        };
        for op in ["linear_map", "plane_encode", "attention_qkv", "losses"] {
            let rep = run_gradcheck(op, &settings);
            assert!(
                rep.passed(1e-4),
                "{op}: max_rel_err {} failures {}",
                rep.max_rel_err,
                rep.failures.len()
            );
        }
    }

    #[test]
    fn full_ray_gradients_match_finite_differences() {
        let settings = GradCheckSettings {
            n_samples: 60,
            ..Default::default()
        };
        let rep = run_gradcheck("render_ray", &settings);
        assert!(
            rep.passed(1e-4),
            "render_ray: max_rel_err {}",
            rep.max_rel_err
        );
    }

    #[test]
    fn selector_filters_ops() {
        let settings = GradCheckSettings {
            n_samples: 5,
            ..Default::default()
        };
        let reports = run_gradchecks(Some("head"), &settings);
        assert_eq!(reports.len(), 2);
    }
}
