//! Dataset emission and loading: PNG frames plus a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DatasetConfig;
use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::renderer::camera::Camera;

use super::oracle::oracle_render;
use super::scene::SceneParams;
use super::signal::{blink_signal, pseudo_speech};

pub const MANIFEST_VERSION: u32 = 1;
const CAMERA_DISTANCE: f64 = 1.4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraMeta {
    pub position: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub focal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandmarkMeta {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameMeta {
    pub index: usize,
    pub image: String,
    pub face_mask: String,
    pub mouth_mask: String,
    pub audio: f64,
    pub blink: f64,
    pub camera: CameraMeta,
    pub landmarks: Vec<LandmarkMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub resolution: usize,
    pub mouth_bbox: Aabb,
    pub frames: Vec<FrameMeta>,
    pub split: Split,
}

/// Orbit camera for frame `t`: +-orbit_degrees of azimuth around frontal.
pub fn orbit_camera(t: usize, n_frames: usize, resolution: usize, orbit_degrees: f64) -> Camera {
    let center = [0.5, 0.5, 0.5];
    let phase = std::f64::consts::TAU * t as f64 / n_frames as f64;
    let theta = orbit_degrees.to_radians() * phase.sin();
    let position = [
        center[0] + CAMERA_DISTANCE * theta.sin(),
        center[1],
        center[2] + CAMERA_DISTANCE * theta.cos(),
    ];
    Camera::look_at(
        position,
        center,
        [0.0, 1.0, 0.0],
        1.7 * resolution as f64,
        resolution,
        resolution,
    )
}

fn to_rgb8(img: &[f64], w: usize, h: usize) -> RgbImage {
    let mut out = RgbImage::new(w as u32, h as u32);
    for py in 0..h {
        for px in 0..w {
            let i = (py * w + px) * 3;
            let p = [
                (img[i].clamp(0.0, 1.0) * 255.0).round() as u8,
                (img[i + 1].clamp(0.0, 1.0) * 255.0).round() as u8,
                (img[i + 2].clamp(0.0, 1.0) * 255.0).round() as u8,
            ];
            out.put_pixel(px as u32, py as u32, image::Rgb(p));
        }
    }
    out
}

fn to_mask8(mask: &[bool], w: usize, h: usize) -> GrayImage {
    let mut out = GrayImage::new(w as u32, h as u32);
    for py in 0..h {
        for px in 0..w {
            let v = if mask[py * w + px] { 255u8 } else { 0 };
            out.put_pixel(px as u32, py as u32, image::Luma([v]));
        }
    }
    out
}

/// Generate the full synthetic dataset on disk; byte-deterministic per seed.
pub fn gen_dataset(
    scene: &SceneParams,
    cfg: &DatasetConfig,
    seed: u64,
    background: [f64; 3],
    out_dir: &Path,
) -> Result<Manifest> {
    if cfg.n_frames < 2 {
        return Err(Error::Dataset("n_frames must be >= 2".into()));
    }
    fs::create_dir_all(out_dir)?;

    let frames: Vec<FrameMeta> = (0..cfg.n_frames)
        .into_par_iter()
        .map(|t| -> Result<FrameMeta> {
            let audio = pseudo_speech(t, seed);
            let blink = blink_signal(t, seed);
            let camera = orbit_camera(t, cfg.n_frames, cfg.resolution, cfg.orbit_degrees);
            let frame = oracle_render(scene, &camera, audio, blink, cfg.oracle_steps, background);

            let image_name = format!("image_{t:04}.png");
            let face_name = format!("face_mask_{t:04}.png");
            let mouth_name = format!("mouth_mask_{t:04}.png");
            to_rgb8(&frame.image, frame.width, frame.height).save(out_dir.join(&image_name))?;
            to_mask8(&frame.face_mask, frame.width, frame.height)
                .save(out_dir.join(&face_name))?;
            to_mask8(&frame.mouth_mask, frame.width, frame.height)
                .save(out_dir.join(&mouth_name))?;

            Ok(FrameMeta {
                index: t,
                image: image_name,
                face_mask: face_name,
                mouth_mask: mouth_name,
                audio,
                blink,
                camera: CameraMeta {
                    position: camera.position,
                    rotation: camera.rotation,
                    focal: camera.focal,
                },
                landmarks: frame
                    .landmarks
                    .iter()
                    .map(|l| LandmarkMeta {
                        name: l.name.clone(),
                        x: l.x,
                        y: l.y,
                    })
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut split = Split {
        train: Vec::new(),
        holdout: Vec::new(),
    };
    for t in 0..cfg.n_frames {
        if (t + 1) % cfg.holdout_every == 0 {
            split.holdout.push(t);
        } else {
            split.train.push(t);
        }
    }

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        resolution: cfg.resolution,
        mouth_bbox: scene.mouth_bbox(),
        frames,
        split,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(out_dir.join("dataset.json"), json)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct LoadedFrame {
    pub index: usize,
    /// Row-major RGB in [0,1].
    pub image: Vec<f32>,
    pub face_mask: Vec<bool>,
    pub mouth_mask: Vec<bool>,
    pub camera: Camera,
    pub audio: f64,
    pub blink: f64,
    pub landmarks: Vec<LandmarkMeta>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub frames: Vec<LoadedFrame>,
}

impl LoadedDataset {
    pub fn resolution(&self) -> usize {
        self.manifest.resolution
    }

    pub fn frame(&self, index: usize) -> Option<&LoadedFrame> {
        self.frames.iter().find(|f| f.index == index)
    }

    pub fn train_frames(&self) -> Vec<&LoadedFrame> {
        self.manifest
            .split
            .train
            .iter()
            .filter_map(|i| self.frame(*i))
            .collect()
    }

    pub fn holdout_frames(&self) -> Vec<&LoadedFrame> {
        self.manifest
            .split
            .holdout
            .iter()
            .filter_map(|i| self.frame(*i))
            .collect()
    }
}

fn load_mask(path: &Path, res: usize) -> Result<Vec<bool>> {
    let img = image::open(path)?.into_luma8();
    if img.width() as usize != res || img.height() as usize != res {
        return Err(Error::Dataset(format!(
            "mask {} has wrong resolution",
            path.display()
        )));
    }
    Ok(img.pixels().map(|p| p.0[0] >= 128).collect())
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let manifest_path = dir.join("dataset.json");
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Dataset(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let res = manifest.resolution;
    let frames = manifest
        .frames
        .iter()
        .map(|meta| -> Result<LoadedFrame> {
            let img = image::open(dir.join(&meta.image))?.into_rgb8();
            if img.width() as usize != res || img.height() as usize != res {
                return Err(Error::Dataset(format!(
                    "frame {} image has wrong resolution",
                    meta.index
                )));
            }
            let image: Vec<f32> = img.pixels().flat_map(|p| p.0).map(|v| v as f32 / 255.0).collect();
            let camera = Camera {
                position: meta.camera.position,
                rotation: meta.camera.rotation,
                focal: meta.camera.focal,
                width: res,
                height: res,
            };
            camera.validate()?;
            Ok(LoadedFrame {
                index: meta.index,
                image,
                face_mask: load_mask(&dir.join(&meta.face_mask), res)?,
                mouth_mask: load_mask(&dir.join(&meta.mouth_mask), res)?,
                camera,
                audio: meta.audio,
                blink: meta.blink,
                landmarks: meta.landmarks.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset {
        dir: dir.to_path_buf(),
        manifest,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> DatasetConfig {
        DatasetConfig {
            n_frames: 10,
            resolution: 16,
            orbit_degrees: 10.0,
            holdout_every: 5,
            oracle_steps: 256,
        }
    }

    #[test]
    fn roundtrip_and_split_bookkeeping() {
        let dir = tempfile::tempdir().unwrap();
        let scene = SceneParams::default();
        let manifest =
            gen_dataset(&scene, &tiny_cfg(), 11, [0.0; 3], dir.path()).unwrap();
        assert_eq!(manifest.frames.len(), 10);
        assert_eq!(manifest.split.train.len(), 8);
        assert_eq!(manifest.split.holdout.len(), 2);

        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.frames.len(), 10);
        assert_eq!(ds.train_frames().len(), 8);
        assert_eq!(ds.holdout_frames().len(), 2);
        for f in &ds.frames {
            assert!(f.audio >= -1.0 && f.audio <= 1.0);
            assert!(f.blink >= 0.0 && f.blink <= 1.0);
            assert_eq!(f.image.len(), 16 * 16 * 3);
            // Mouth mask stays inside the face mask.
            for i in 0..f.mouth_mask.len() {
                if f.mouth_mask[i] {
                    assert!(f.face_mask[i]);
                }
            }
        }
    }

    #[test]
    fn same_seed_byte_identical() {
        let scene = SceneParams::default();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        gen_dataset(&scene, &tiny_cfg(), 7, [0.0; 3], d1.path()).unwrap();
        gen_dataset(&scene, &tiny_cfg(), 7, [0.0; 3], d2.path()).unwrap();
        let mut names: Vec<String> = fs::read_dir(d1.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(names.len() > 30);
        for name in names {
            let a = fs::read(d1.path().join(&name)).unwrap();
            let b = fs::read(d2.path().join(&name)).unwrap();
            assert_eq!(a, b, "file {name} differs between same-seed runs");
        }
    }

    #[test]
    fn unwritable_directory_errors() {
        let scene = SceneParams::default();
        let err = gen_dataset(
            &scene,
            &tiny_cfg(),
            7,
            [0.0; 3],
            Path::new("/proc/definitely/not/writable"),
        );
        assert!(err.is_err());
    }
}
