use std::time::Instant;
use talknerf_core::config::RunConfig;
use talknerf_core::synth::{gen_dataset, load_dataset, SceneParams};
use talknerf_core::trainer::train;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let coarse: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let fine: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let rays: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(512);

    let mut cfg = RunConfig::default();
    cfg.seed = 42;
    cfg.dataset.n_frames = 200;
    cfg.dataset.resolution = 64;
    cfg.dataset.oracle_steps = 512;
    // Lean acceptance-style profile.
    cfg.encoder.n_levels = 6;
    cfg.encoder.log2_table_size = 12;
    cfg.condition.n_freqs_audio = 4;
    cfg.condition.n_freqs_blink = 3;
    cfg.condition.hidden = 16;
    cfg.condition.width = 8;
    cfg.field.d_attn = 16;
    cfg.field.d_v = 16;
    cfg.field.geo_dim = 11;
    cfg.field.point_hidden = 32;
    cfg.field.head_hidden = 32;
    cfg.field.head_layers = 1;
    cfg.field.n_freqs_dir = 2;
    cfg.renderer.train_samples = 32;
    cfg.renderer.eval_samples = 96;
    cfg.schedule.coarse_steps = coarse;
    cfg.schedule.fine_steps = fine;
    cfg.schedule.rays_per_step = rays;
    cfg.schedule.lr_tables = 1e-2;
    cfg.schedule.lr_heads = 1e-3;
    cfg.schedule.eval_interval = 200;
    cfg.schedule.eval_frames = 2;
    cfg.loss.patch_size = 24;

    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let t0 = Instant::now();
    gen_dataset(&SceneParams::default(), &cfg.dataset, cfg.seed, cfg.renderer.background, &data_dir).unwrap();
    println!("dataset gen: {:.1}s", t0.elapsed().as_secs_f64());
    let ds = load_dataset(&data_dir).unwrap();

    let t1 = Instant::now();
    let summary = train(&cfg, &ds, &dir.path().join("run"), None).unwrap();
    let dt = t1.elapsed().as_secs_f64();
    println!(
        "train {} steps: {:.1}s ({:.1} ms/step) | psnr {:.2} mouth {:.2} lmd {:.3}",
        summary.steps_run, dt, 1000.0 * dt / summary.steps_run as f64,
        summary.final_eval.mean_psnr, summary.final_eval.mean_mouth_psnr, summary.final_eval.mean_lmd
    );
}
