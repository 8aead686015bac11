//! Coarse-to-fine training.
//!
//! Each step is a barrier: ray batches are processed in fixed-size chunks
//! whose gradient sinks merge in ascending chunk order, so checkpoints are
//! bit-identical at any thread count (and trivially so at --threads 1).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{FineUpdates, FusionMode, RunConfig};
use crate::diffcore::{adam_step, AdamHyper, AdamState, GradSink};
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::metrics::evaluate::{evaluate_frames, EvalReport};
use crate::renderer::{render_ray, render_ray_backward, FrameCond, RayScratch, RenderSettings};
use crate::synth::dataset::{LoadedDataset, LoadedFrame};
use crate::trainer::checkpoint::{load_checkpoint, save_checkpoint, CheckpointTensor};
use crate::trainer::loss::{coarse_pixel_weight, fine_loss, fine_loss_backward};

const CHUNK_RAYS: usize = 256;
const SALT_BATCH: u64 = 0x42_41_54_43_48;
const SALT_RAY: u64 = 0x52_41_59;
const SALT_FINE: u64 = 0x46_49_4e_45;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

#[derive(Debug)]
pub struct TrainSummary {
    pub steps_run: usize,
    pub final_eval: EvalReport,
    pub checkpoint: PathBuf,
    pub wall_secs: f64,
    pub config_hash: u64,
}

/// Serialize model + optimizer + progress into checkpoint tensors.
pub fn state_to_tensors(
    model: &FieldModel<f32>,
    adam: &[AdamState<f32>],
    step: usize,
    config_hash: u64,
) -> Vec<CheckpointTensor> {
    let mut out = Vec::new();
    for t in model.tensors() {
        out.push(CheckpointTensor::new(
            t.name.clone(),
            t.shape.clone(),
            t.values.clone(),
        ));
    }
    for t in model.tensors() {
        let st = &adam[t.id];
        out.push(CheckpointTensor::new(
            format!("adam.{}.m", t.name),
            t.shape.clone(),
            st.m.clone(),
        ));
        out.push(CheckpointTensor::new(
            format!("adam.{}.v", t.name),
            t.shape.clone(),
            st.v.clone(),
        ));
        out.push(CheckpointTensor::scalar(
            format!("adam.{}.step", t.name),
            st.step_count as f32,
        ));
    }
    out.push(CheckpointTensor::scalar("meta.step", step as f32));
    let hash_bytes = config_hash.to_le_bytes();
    out.push(CheckpointTensor::new(
        "meta.config_hash",
        vec![8],
        hash_bytes.iter().map(|b| *b as f32).collect(),
    ));
    out
}

/// Restore model + optimizer from checkpoint tensors. A config-hash
/// mismatch only warns; a tensor shape mismatch is an error.
pub fn restore_state(
    tensors: Vec<CheckpointTensor>,
    model: &mut FieldModel<f32>,
    adam: &mut [AdamState<f32>],
    expected_hash: u64,
) -> Result<usize> {
    let by_name: std::collections::HashMap<String, CheckpointTensor> =
        tensors.into_iter().map(|t| (t.name.clone(), t)).collect();

    let take = |name: &str| -> Result<&CheckpointTensor> {
        by_name
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{name}'")))
    };

    if let Ok(h) = take("meta.config_hash") {
        let mut bytes = [0u8; 8];
        for (i, v) in h.values.iter().take(8).enumerate() {
            bytes[i] = *v as u8;
        }
        let found = u64::from_le_bytes(bytes);
        if found != expected_hash {
            log::warn!(
                "checkpoint config hash {found:016x} differs from current {expected_hash:016x}; loading anyway"
            );
        }
    }

    for t in model.tensors_mut() {
        let src = take(&t.name)?;
        if src.shape != t.shape {
            return Err(Error::ShapeMismatch {
                name: t.name.clone(),
                expected: t.shape.clone(),
                got: src.shape.clone(),
            });
        }
        t.values.copy_from_slice(&src.values);
        let m = take(&format!("adam.{}.m", t.name))?;
        let v = take(&format!("adam.{}.v", t.name))?;
        if m.shape != t.shape || v.shape != t.shape {
            return Err(Error::ShapeMismatch {
                name: format!("adam.{}", t.name),
                expected: t.shape.clone(),
                got: m.shape.clone(),
            });
        }
        adam[t.id].m.copy_from_slice(&m.values);
        adam[t.id].v.copy_from_slice(&v.values);
        adam[t.id].step_count = take(&format!("adam.{}.step", t.name))?.values[0] as u64;
    }
    let step = take("meta.step")?.values[0] as usize;
    Ok(step)
}

/// Whether a tensor holds hash-table rows (table learning-rate group).
fn is_table_tensor(name: &str) -> bool {
    name.contains(".hash.")
}

fn fine_selected(name: &str, updates: FineUpdates, fusion: FusionMode) -> bool {
    match updates {
        FineUpdates::All => true,
        FineUpdates::MouthOnly => {
            if fusion == FusionMode::Off {
                // Without spatial fusion the mouth branch is inert; the
                // fine stage refines the face branch on mouth patches.
                name.starts_with("face.")
            } else {
                name.starts_with("mouth.")
            }
        }
    }
}

struct RayTask {
    frame_pos: usize,
    px: usize,
    py: usize,
    ray_seed: u64,
}

enum ChunkMode<'a> {
    /// Per-pixel coarse term with backward (lambda for the mouth set).
    Coarse { lambda_mouth: f32 },
    /// Forward only, collecting predictions.
    ForwardOnly { preds: &'a mut [[f32; 3]] },
    /// Backward with caller-supplied pixel gradients (fine pass 2).
    BackwardWith { d_rgb: &'a [[f32; 3]] },
}

/// One chunk of rays processed sequentially in task order.
fn run_chunk(
    model: &FieldModel<f32>,
    frames: &[&LoadedFrame],
    st: &RenderSettings<f32>,
    tasks: &[RayTask],
    mut mode: ChunkMode<'_>,
) -> (GradSink<f32>, f64) {
    let tensors = model.tensors();
    let mut sink = GradSink::zeros_like(&tensors);
    drop(tensors);
    let mut scratch = RayScratch::default();
    let mut loss = 0.0f64;
    for (i, task) in tasks.iter().enumerate() {
        let frame = frames[task.frame_pos];
        let res = frame.camera.width;
        let px_off = (task.py * res + task.px) * 3;
        let gt = &frame.image[px_off..px_off + 3];
        let cond = FrameCond {
            audio: frame.audio,
            blink: frame.blink,
        };
        let ray = frame.camera.generate_ray(task.px, task.py);
        let (pred, has_grad) = match ray {
            None => (st.background, false),
            Some(ray) => {
                let mut rng = ChaCha8Rng::seed_from_u64(task.ray_seed);
                let rgb = render_ray(model, &ray, &cond, st, Some(&mut rng), &mut scratch);
                (rgb, true)
            }
        };
        match &mut mode {
            ChunkMode::Coarse { lambda_mouth } => {
                let in_mouth = frame.mouth_mask[task.py * res + task.px];
                let w = coarse_pixel_weight(true, in_mouth, *lambda_mouth);
                let mut sq = 0.0f32;
                let mut d = [0.0f32; 3];
                for k in 0..3 {
                    let r = pred[k] - gt[k];
                    sq += r * r;
                    d[k] = 2.0 * w * r;
                }
                loss += (w * sq) as f64;
                if has_grad {
                    render_ray_backward(model, st, &mut scratch, d, &mut sink);
                }
            }
            ChunkMode::ForwardOnly { preds } => {
                preds[i] = pred;
            }
            ChunkMode::BackwardWith { d_rgb } => {
                if has_grad {
                    render_ray_backward(model, st, &mut scratch, d_rgb[i], &mut sink);
                }
            }
        }
    }
    (sink, loss)
}

pub fn train(
    cfg: &RunConfig,
    dataset: &LoadedDataset,
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainSummary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let config_hash = cfg.hash();
    fs::write(out_dir.join("config.json"), cfg.to_json_pretty())?;
    fs::write(out_dir.join("config_hash.txt"), format!("{config_hash:016x}\n"))?;

    let threads = if cfg.threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cfg.threads
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| train_inner(cfg, dataset, out_dir, resume, config_hash))
}

fn train_inner(
    cfg: &RunConfig,
    dataset: &LoadedDataset,
    out_dir: &Path,
    resume: Option<&Path>,
    config_hash: u64,
) -> Result<TrainSummary> {
    let start = Instant::now();
    let mut model: FieldModel<f32> = FieldModel::new(cfg, dataset.manifest.mouth_bbox);
    let mut adam: Vec<AdamState<f32>> = model
        .tensors()
        .iter()
        .map(|t| AdamState::zeros(t.len()))
        .collect();
    let mut start_step = 0usize;
    if let Some(path) = resume {
        let tensors = load_checkpoint(path)?;
        start_step = restore_state(tensors, &mut model, &mut adam, config_hash)?;
        log::info!("resumed from {} at step {start_step}", path.display());
    }

    let train_frames: Vec<&LoadedFrame> = dataset.train_frames();
    let holdout_frames: Vec<&LoadedFrame> = dataset.holdout_frames();
    if train_frames.is_empty() || holdout_frames.is_empty() {
        return Err(Error::Dataset("dataset split has an empty side".into()));
    }
    let res = dataset.resolution();

    let train_settings = RenderSettings::<f32>::from_config(cfg, true);
    let eval_settings = RenderSettings::<f32>::from_config(cfg, false);
    let lambda_mouth = cfg.loss.lambda_mouth as f32;

    let total_steps = cfg.schedule.coarse_steps + cfg.schedule.fine_steps;
    let fine_mask: Vec<bool> = model
        .tensors()
        .iter()
        .map(|t| fine_selected(&t.name, cfg.schedule.fine_updates, cfg.renderer.fusion))
        .collect();
    let table_hyper = AdamHyper {
        lr: cfg.schedule.lr_tables,
        beta1: cfg.schedule.beta1,
        beta2: cfg.schedule.beta2,
        eps: cfg.schedule.adam_eps,
    };
    let head_hyper = AdamHyper {
        lr: cfg.schedule.lr_heads,
        ..table_hyper
    };

    let mut metrics_csv = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out_dir.join("metrics.csv"))?;
    if start_step == 0 {
        writeln!(metrics_csv, "step,split,psnr,mouth_psnr,lmd,loss")?;
    }

    let checkpoint_path = out_dir.join("checkpoint.bin");
    #[allow(unused_assignments)]
    let mut last_loss = f64::NAN;
    let mut warned_patch_clip = false;

    for step in start_step..total_steps {
        let coarse = step < cfg.schedule.coarse_steps;
        let loss = if coarse {
            coarse_step(cfg, &mut model, &train_frames, &train_settings, res, step, lambda_mouth)?
        } else {
            fine_step(
                cfg,
                &mut model,
                dataset,
                &train_frames,
                &train_settings,
                res,
                step,
                &mut warned_patch_clip,
            )?
        };
        if !loss.is_finite() {
            save_checkpoint(
                &checkpoint_path,
                &state_to_tensors(&model, &adam, step, config_hash),
            )?;
            return Err(Error::NonFiniteLoss { step, value: loss });
        }
        last_loss = loss;

        // Apply Adam; fine phase freezes everything outside the update set.
        for t in model.tensors_mut() {
            if !coarse && !fine_mask[t.id] {
                t.zero_grad();
                continue;
            }
            let hyper = if is_table_tensor(&t.name) {
                &table_hyper
            } else {
                &head_hyper
            };
            adam_step(t, &mut adam[t.id], hyper)?;
        }

        let step1 = step + 1;
        if step1 % cfg.schedule.eval_interval == 0 || step1 == total_steps {
            let n_eval = if cfg.schedule.eval_frames == 0 {
                holdout_frames.len()
            } else {
                cfg.schedule.eval_frames.min(holdout_frames.len())
            };
            let report = evaluate_frames(&model, &holdout_frames[..n_eval], &eval_settings)?;
            writeln!(
                metrics_csv,
                "{},holdout,{:.6},{:.6},{:.6},{:.6}",
                step1, report.mean_psnr, report.mean_mouth_psnr, report.mean_lmd, last_loss
            )?;
            metrics_csv.flush()?;
            log::info!(
                "step {step1}/{total_steps} ({}) loss {last_loss:.5} psnr {:.2} mouth {:.2} lmd {:.2}",
                if coarse { "coarse" } else { "fine" },
                report.mean_psnr,
                report.mean_mouth_psnr,
                report.mean_lmd
            );
        }
    }

    save_checkpoint(
        &checkpoint_path,
        &state_to_tensors(&model, &adam, total_steps, config_hash),
    )?;

    let final_eval = evaluate_frames(&model, &holdout_frames, &eval_settings)?;
    final_eval.write_csv(&out_dir.join("eval.csv"))?;
    final_eval.write_json_summary(config_hash, &out_dir.join("summary.json"))?;

    Ok(TrainSummary {
        steps_run: total_steps - start_step,
        final_eval,
        checkpoint: checkpoint_path,
        wall_secs: start.elapsed().as_secs_f64(),
        config_hash,
    })
}

fn merge_and_apply(model: &mut FieldModel<f32>, chunks: Vec<(GradSink<f32>, f64)>) -> f64 {
    let mut loss = 0.0;
    let tensors = model.tensors();
    let mut main = GradSink::zeros_like(&tensors);
    for (sink, l) in &chunks {
        main.merge_from(sink);
        loss += l;
    }
    drop(tensors);
    main.apply_to(&mut model.tensors_mut());
    loss
}

fn coarse_step(
    cfg: &RunConfig,
    model: &mut FieldModel<f32>,
    train_frames: &[&LoadedFrame],
    st: &RenderSettings<f32>,
    res: usize,
    step: usize,
    lambda_mouth: f32,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, SALT_BATCH, step as u64]));
    let tasks: Vec<RayTask> = (0..cfg.schedule.rays_per_step)
        .map(|i| RayTask {
            frame_pos: rng.gen_range(0..train_frames.len()),
            px: rng.gen_range(0..res),
            py: rng.gen_range(0..res),
            ray_seed: mix_seed(&[cfg.seed, SALT_RAY, step as u64, i as u64]),
        })
        .collect();

    let chunks: Vec<(GradSink<f32>, f64)> = tasks
        .par_chunks(CHUNK_RAYS)
        .map(|chunk| run_chunk(model, train_frames, st, chunk, ChunkMode::Coarse { lambda_mouth }))
        .collect();
    Ok(merge_and_apply(model, chunks))
}

#[allow(clippy::too_many_arguments)]
fn fine_step(
    cfg: &RunConfig,
    model: &mut FieldModel<f32>,
    dataset: &LoadedDataset,
    train_frames: &[&LoadedFrame],
    st: &RenderSettings<f32>,
    res: usize,
    step: usize,
    warned_patch_clip: &mut bool,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, SALT_FINE, step as u64]));
    let frame_pos = rng.gen_range(0..train_frames.len());
    let frame = train_frames[frame_pos];
    let ps = cfg.loss.patch_size.min(res);

    // Patch centered on the projected mouth box center, jittered.
    let center = dataset.manifest.mouth_bbox.center();
    let (cx, cy) = frame.camera.project(center).unwrap_or((res as f64 / 2.0, res as f64 / 2.0));
    let jx: i64 = rng.gen_range(-3..=3);
    let jy: i64 = rng.gen_range(-3..=3);
    let want_x0 = cx.round() as i64 - ps as i64 / 2 + jx;
    let want_y0 = cy.round() as i64 - ps as i64 / 2 + jy;
    let x0 = want_x0.clamp(0, (res - ps) as i64) as usize;
    let y0 = want_y0.clamp(0, (res - ps) as i64) as usize;
    if (x0 as i64 != want_x0 || y0 as i64 != want_y0) && !*warned_patch_clip {
        log::warn!("fine patch clipped to image bounds");
        *warned_patch_clip = true;
    }

    let tasks: Vec<RayTask> = (0..ps * ps)
        .map(|i| RayTask {
            frame_pos,
            px: x0 + i % ps,
            py: y0 + i / ps,
            ray_seed: mix_seed(&[cfg.seed, SALT_FINE, step as u64, i as u64]),
        })
        .collect();

    // Pass 1: forward-only patch render with identical per-ray rngs.
    let mut preds = vec![[0.0f32; 3]; ps * ps];
    let chunk_preds: Vec<Vec<[f32; 3]>> = tasks
        .par_chunks(CHUNK_RAYS)
        .map(|chunk| {
            let mut out = vec![[0.0f32; 3]; chunk.len()];
            run_chunk(
                model,
                train_frames,
                st,
                chunk,
                ChunkMode::ForwardOnly { preds: &mut out },
            );
            out
        })
        .collect();
    let mut off = 0;
    for cp in chunk_preds {
        preds[off..off + cp.len()].copy_from_slice(&cp);
        off += cp.len();
    }

    let pred_flat: Vec<f32> = preds.iter().flat_map(|p| *p).collect();
    let mut gt_flat = Vec::with_capacity(ps * ps * 3);
    for py in y0..y0 + ps {
        for px in x0..x0 + ps {
            gt_flat.extend_from_slice(&frame.image[(py * res + px) * 3..(py * res + px) * 3 + 3]);
        }
    }
    let loss = fine_loss(
        &pred_flat,
        &gt_flat,
        ps,
        ps,
        cfg.loss.lambda_perc as f32,
        cfg.loss.perceptual_surrogate,
    ) as f64;
    let mut d_patch = vec![0.0f32; ps * ps * 3];
    fine_loss_backward(
        &pred_flat,
        &gt_flat,
        ps,
        ps,
        cfg.loss.lambda_perc as f32,
        cfg.loss.perceptual_surrogate,
        &mut d_patch,
    );
    let d_rgb: Vec<[f32; 3]> = (0..ps * ps)
        .map(|i| [d_patch[i * 3], d_patch[i * 3 + 1], d_patch[i * 3 + 2]])
        .collect();

    // Pass 2: identical forward (same seeds) plus backward.
    let chunks: Vec<(GradSink<f32>, f64)> = tasks
        .par_chunks(CHUNK_RAYS)
        .enumerate()
        .map(|(ci, chunk)| {
            let d_slice = &d_rgb[ci * CHUNK_RAYS..ci * CHUNK_RAYS + chunk.len()];
            run_chunk(
                model,
                train_frames,
                st,
                chunk,
                ChunkMode::BackwardWith { d_rgb: d_slice },
            )
        })
        .collect();
    let _ = merge_and_apply(model, chunks);
    Ok(loss)
}
