//! Landmark distance with template-matched landmark localization.
//!
//! Predicted landmarks come from matching the ground-truth marker
//! signature (a small patch around the stored landmark) against the
//! rendered image within a window centered on the ground-truth location.

use crate::error::{Error, Result};
use crate::synth::dataset::LandmarkMeta;

/// Search window side in pixels (candidate offsets span +-window/2).
pub const MATCH_WINDOW: usize = 9;
/// Template patch side in pixels.
pub const MATCH_PATCH: usize = 5;

/// Mean Euclidean distance over landmarks matched by name.
pub fn lmd(pred: &[LandmarkMeta], gt: &[LandmarkMeta]) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::MissingLandmark("(empty set)".into()));
    }
    let mut total = 0.0;
    for g in gt {
        let p = pred
            .iter()
            .find(|p| p.name == g.name)
            .ok_or_else(|| Error::MissingLandmark(g.name.clone()))?;
        total += ((p.x - g.x).powi(2) + (p.y - g.y).powi(2)).sqrt();
    }
    Ok(total / gt.len() as f64)
}

fn pixel(img: &[f32], w: usize, h: usize, x: i64, y: i64, k: usize) -> f64 {
    let x = x.clamp(0, w as i64 - 1) as usize;
    let y = y.clamp(0, h as i64 - 1) as usize;
    img[(y * w + x) * 3 + k] as f64
}

/// Locate each ground-truth landmark in `pred_img` by SSD template
/// matching of the `gt_img` patch around it; ties keep the first minimum
/// in scan order.
pub fn locate_landmarks(
    pred_img: &[f32],
    gt_img: &[f32],
    w: usize,
    h: usize,
    gt_landmarks: &[LandmarkMeta],
) -> Vec<LandmarkMeta> {
    let half_win = (MATCH_WINDOW / 2) as i64;
    let half_patch = (MATCH_PATCH / 2) as i64;
    gt_landmarks
        .iter()
        .map(|lm| {
            let cx = lm.x.round() as i64;
            let cy = lm.y.round() as i64;
            let mut best = (f64::INFINITY, 0i64, 0i64);
            for dy in -half_win..=half_win {
                for dx in -half_win..=half_win {
                    let mut ssd = 0.0;
                    for py in -half_patch..=half_patch {
                        for px in -half_patch..=half_patch {
                            for k in 0..3 {
                                let t = pixel(gt_img, w, h, cx + px, cy + py, k);
                                let s = pixel(pred_img, w, h, cx + dx + px, cy + dy + py, k);
                                let d = t - s;
                                ssd += d * d;
                            }
                        }
                    }
                    if ssd < best.0 {
                        best = (ssd, dx, dy);
                    }
                }
            }
            LandmarkMeta {
                name: lm.name.clone(),
                x: lm.x + best.1 as f64,
                y: lm.y + best.2 as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lm(name: &str, x: f64, y: f64) -> LandmarkMeta {
        LandmarkMeta {
            name: name.into(),
            x,
            y,
        }
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let a = vec![lm("a", 3.0, 4.0), lm("b", 10.0, 2.5)];
        assert_eq!(lmd(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn one_offset_landmark_closed_form() {
        // One of five landmarks offset by (3,4): mean = 5/5 = 1.
        let gt: Vec<_> = (0..5).map(|i| lm(&format!("p{i}"), i as f64, 0.0)).collect();
        let mut pred = gt.clone();
        pred[2].x += 3.0;
        pred[2].y += 4.0;
        assert!((lmd(&pred, &gt).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_name_errors() {
        let gt = vec![lm("a", 0.0, 0.0)];
        let pred = vec![lm("b", 0.0, 0.0)];
        assert!(lmd(&pred, &gt).is_err());
    }

    #[test]
    fn translation_consistency() {
        let gt = vec![lm("a", 3.0, 4.0), lm("b", 8.0, 1.0)];
        let pred = vec![lm("a", 3.5, 4.5), lm("b", 8.5, 0.5)];
        let shift = |v: &[LandmarkMeta]| -> Vec<LandmarkMeta> {
            v.iter().map(|l| lm(&l.name, l.x + 2.0, l.y - 3.0)).collect()
        };
        let d0 = lmd(&pred, &gt).unwrap();
        let d1 = lmd(&shift(&pred), &shift(&gt)).unwrap();
        assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn template_match_recovers_a_shift() {
        // A bright dot in gt at (10,10); prediction has it at (12, 9).
        let (w, h) = (24usize, 24usize);
        let mut gt_img = vec![0.1f32; w * h * 3];
        let mut pred_img = vec![0.1f32; w * h * 3];
        let put = |img: &mut Vec<f32>, x: usize, y: usize| {
            for k in 0..3 {
                img[(y * w + x) * 3 + k] = 1.0;
            }
        };
        put(&mut gt_img, 10, 10);
        put(&mut pred_img, 12, 9);
        let gt_lms = vec![lm("dot", 10.0, 10.0)];
        let found = locate_landmarks(&pred_img, &gt_img, w, h, &gt_lms);
        assert_eq!(found[0].x, 12.0);
        assert_eq!(found[0].y, 9.0);
    }

    #[test]
    fn perfect_prediction_locates_in_place() {
        let (w, h) = (16usize, 16usize);
        let img: Vec<f32> = (0..w * h * 3).map(|i| ((i * 37) % 101) as f32 / 101.0).collect();
        let gt_lms = vec![lm("p", 7.3, 8.9)];
        let found = locate_landmarks(&img, &img, w, h, &gt_lms);
        assert_eq!(found[0].x, 7.3);
        assert_eq!(found[0].y, 8.9);
    }
}
