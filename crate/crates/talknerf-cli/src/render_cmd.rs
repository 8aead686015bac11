//! The `render` subcommand: prediction frames and comparison triptychs.

use std::path::Path;

use image::RgbImage;

use talknerf_core::config::RunConfig;
use talknerf_core::error::Error as CoreError;
use talknerf_core::renderer::{render_image, FrameCond, RenderSettings};
use talknerf_core::synth::LoadedDataset;
use talknerf_core::FieldModel;

/// Accepts "3", "0..5" (inclusive), or "1,4,9".
pub fn parse_frames(spec: &str, max_index: usize) -> anyhow::Result<Vec<usize>> {
    let bad = |what: &str| {
        anyhow::Error::from(CoreError::Config(format!(
            "{what}; valid frame indices are 0..={max_index}"
        )))
    };
    let mut out = Vec::new();
    if let Some((a, b)) = spec.split_once("..") {
        let start: usize = a.parse().map_err(|_| bad("bad range start"))?;
        let end: usize = b.parse().map_err(|_| bad("bad range end"))?;
        if start > end {
            return Err(bad("empty range"));
        }
        out.extend(start..=end);
    } else {
        for part in spec.split(',') {
            out.push(part.trim().parse().map_err(|_| bad("bad frame index"))?);
        }
    }
    for &i in &out {
        if i > max_index {
            return Err(bad(&format!("frame {i} out of range")));
        }
    }
    Ok(out)
}

fn to_rgb8(img: &[f32], w: usize, h: usize) -> RgbImage {
    let mut out = RgbImage::new(w as u32, h as u32);
    for py in 0..h {
        for px in 0..w {
            let i = (py * w + px) * 3;
            out.put_pixel(
                px as u32,
                py as u32,
                image::Rgb([
                    (img[i].clamp(0.0, 1.0) * 255.0).round() as u8,
                    (img[i + 1].clamp(0.0, 1.0) * 255.0).round() as u8,
                    (img[i + 2].clamp(0.0, 1.0) * 255.0).round() as u8,
                ]),
            );
        }
    }
    out
}

pub fn render_frames(
    model: &FieldModel<f32>,
    cfg: &RunConfig,
    dataset: &LoadedDataset,
    frames_spec: &str,
    out: &Path,
    side_by_side: bool,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let max_index = dataset
        .frames
        .iter()
        .map(|f| f.index)
        .max()
        .unwrap_or(0);
    let indices = parse_frames(frames_spec, max_index)?;
    let settings = RenderSettings::<f32>::from_config(cfg, false);
    let res = dataset.resolution();
    for idx in indices {
        let frame = dataset.frame(idx).ok_or_else(|| {
            CoreError::Config(format!(
                "frame {idx} missing from dataset; valid indices are 0..={max_index}"
            ))
        })?;
        let pred = render_image(
            model,
            &frame.camera,
            &FrameCond {
                audio: frame.audio,
                blink: frame.blink,
            },
            &settings,
        );
        to_rgb8(&pred, res, res).save(out.join(format!("pred_{idx:04}.png")))?;
        if side_by_side {
            // GT | prediction | absolute difference.
            let mut trip = vec![0.0f32; res * res * 9];
            for py in 0..res {
                for px in 0..res {
                    let src = (py * res + px) * 3;
                    let row = py * res * 9;
                    for k in 0..3 {
                        trip[row + px * 3 + k] = frame.image[src + k];
                        trip[row + (res + px) * 3 + k] = pred[src + k];
                        trip[row + (2 * res + px) * 3 + k] =
                            (frame.image[src + k] - pred[src + k]).abs();
                    }
                }
            }
            to_rgb8(&trip, 3 * res, res).save(out.join(format!("compare_{idx:04}.png")))?;
        }
        log::info!("rendered frame {idx}");
    }
    Ok(())
}
