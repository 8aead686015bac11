//! Frame-set evaluation: render, score, and write reports.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::renderer::{render_image, FrameCond, RenderSettings};
use crate::synth::dataset::LoadedFrame;

use super::landmarks::{lmd, locate_landmarks};
use super::psnr::psnr;

#[derive(Debug, Clone)]
pub struct FrameEval {
    pub frame: usize,
    pub psnr: f64,
    pub mouth_psnr: f64,
    pub lmd: f64,
    pub capped: bool,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub frames: Vec<FrameEval>,
    pub mean_psnr: f64,
    pub mean_mouth_psnr: f64,
    pub mean_lmd: f64,
}

impl EvalReport {
    fn from_frames(frames: Vec<FrameEval>) -> Self {
        let n = frames.len().max(1) as f64;
        let mean_psnr = frames.iter().map(|f| f.psnr).sum::<f64>() / n;
        let mean_mouth_psnr = frames.iter().map(|f| f.mouth_psnr).sum::<f64>() / n;
        let mean_lmd = frames.iter().map(|f| f.lmd).sum::<f64>() / n;
        Self {
            frames,
            mean_psnr,
            mean_mouth_psnr,
            mean_lmd,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("frame,psnr,mouth_psnr,lmd\n");
        for f in &self.frames {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                f.frame, f.psnr, f.mouth_psnr, f.lmd
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// JSON summary with the config hash; LPIPS/FID are reported as "n/a"
    /// rather than approximated.
    pub fn write_json_summary(&self, config_hash: u64, path: &Path) -> Result<()> {
        let summary = serde_json::json!({
            "config_hash": format!("{config_hash:016x}"),
            "n_frames": self.frames.len(),
            "mean_psnr": self.mean_psnr,
            "mean_mouth_psnr": self.mean_mouth_psnr,
            "mean_lmd": self.mean_lmd,
            "lpips": "n/a",
            "fid": "n/a",
        });
        fs::write(path, serde_json::to_string_pretty(&summary)?)?;
        Ok(())
    }
}

/// Score one already-rendered frame against its ground truth.
pub fn eval_rendered_frame(
    rendered: &[f32],
    frame: &LoadedFrame,
    resolution: usize,
) -> Result<FrameEval> {
    let whole = psnr(rendered, &frame.image, None)?;
    let mouth = psnr(rendered, &frame.image, Some(&frame.mouth_mask))?;
    let located = locate_landmarks(
        rendered,
        &frame.image,
        resolution,
        resolution,
        &frame.landmarks,
    );
    let lmd_px = lmd(&located, &frame.landmarks)?;
    Ok(FrameEval {
        frame: frame.index,
        psnr: whole.db,
        mouth_psnr: mouth.db,
        lmd: lmd_px,
        capped: whole.capped,
    })
}

/// Render and score a set of frames with the given model.
pub fn evaluate_frames(
    model: &FieldModel<f32>,
    frames: &[&LoadedFrame],
    settings: &RenderSettings<f32>,
) -> Result<EvalReport> {
    if frames.is_empty() {
        return Err(Error::Dataset("evaluation split is empty".into()));
    }
    let mut evals = Vec::with_capacity(frames.len());
    for frame in frames {
        let res = frame.camera.width;
        if frame.image.len() != res * res * 3 {
            return Err(Error::Dataset(format!(
                "frame {} image size does not match camera resolution",
                frame.index
            )));
        }
        let rendered = render_image(
            model,
            &frame.camera,
            &FrameCond {
                audio: frame.audio,
                blink: frame.blink,
            },
            settings,
        );
        evals.push(eval_rendered_frame(&rendered, frame, res)?);
    }
    Ok(EvalReport::from_frames(evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::dataset::LandmarkMeta;

    #[test]
    fn ground_truth_against_itself_caps_and_zeroes() {
        let res = 16usize;
        let image: Vec<f32> = (0..res * res * 3)
            .map(|i| ((i * 31) % 97) as f32 / 97.0)
            .collect();
        let frame = LoadedFrame {
            index: 3,
            image: image.clone(),
            face_mask: vec![true; res * res],
            mouth_mask: vec![true; res * res],
            camera: crate::renderer::Camera::look_at(
                [0.5, 0.5, 1.9],
                [0.5, 0.5, 0.5],
                [0.0, 1.0, 0.0],
                27.0,
                res,
                res,
            ),
            audio: 0.0,
            blink: 0.0,
            landmarks: vec![LandmarkMeta {
                name: "p".into(),
                x: 8.0,
                y: 8.0,
            }],
        };
        let ev = eval_rendered_frame(&image, &frame, res).unwrap();
        assert_eq!(ev.psnr, 99.0);
        assert!(ev.capped);
        assert_eq!(ev.lmd, 0.0);
    }

    #[test]
    fn report_means_are_arithmetic_means() {
        let report = EvalReport::from_frames(vec![
            FrameEval {
                frame: 0,
                psnr: 30.0,
                mouth_psnr: 25.0,
                lmd: 1.0,
                capped: false,
            },
            FrameEval {
                frame: 1,
                psnr: 34.0,
                mouth_psnr: 27.0,
                lmd: 3.0,
                capped: false,
            },
        ]);
        assert!((report.mean_psnr - 32.0).abs() < 1e-12);
        assert!((report.mean_mouth_psnr - 26.0).abs() < 1e-12);
        assert!((report.mean_lmd - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_rows_match_report() {
        let report = EvalReport::from_frames(vec![FrameEval {
            frame: 9,
            psnr: 31.5,
            mouth_psnr: 26.25,
            lmd: 0.75,
            capped: false,
        }]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.csv");
        report.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("frame,psnr,mouth_psnr,lmd\n"));
        assert!(text.contains("9,31.5"));
    }
}
