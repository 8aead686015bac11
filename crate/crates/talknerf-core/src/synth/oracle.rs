//! Independent fine-step renderer of the analytic scene.
//!
//! Deliberately shares no compositing code with the main renderer: its own
//! uniform-step march in double precision serves as the quadrature oracle,
//! and analytic ellipsoid silhouettes supply masks and landmarks.

use rayon::prelude::*;

use crate::renderer::camera::Camera;

use super::scene::SceneParams;

#[derive(Debug, Clone)]
pub struct Landmark {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct OracleFrame {
    pub width: usize,
    pub height: usize,
    pub image: Vec<f64>,
    pub face_mask: Vec<bool>,
    pub mouth_mask: Vec<bool>,
    pub landmarks: Vec<Landmark>,
}

/// March one ray with uniform midpoint steps. Returns (rgb, weight sum,
/// final transmittance) so tests can check the partition identity.
pub fn oracle_ray(
    scene: &SceneParams,
    origin: [f64; 3],
    dir: [f64; 3],
    t0: f64,
    t1: f64,
    steps: usize,
    audio: f64,
    blink: f64,
    background: [f64; 3],
) -> ([f64; 3], f64, f64) {
    assert!(steps >= 256, "oracle needs steps_per_ray >= 256");
    let dt = (t1 - t0) / steps as f64;
    let mut trans = 1.0f64;
    let mut rgb = [0.0f64; 3];
    let mut wsum = 0.0f64;
    for i in 0..steps {
        let t = t0 + (i as f64 + 0.5) * dt;
        let p = [
            origin[0] + t * dir[0],
            origin[1] + t * dir[1],
            origin[2] + t * dir[2],
        ];
        let (sigma, c) = scene.density_color(p, audio, blink);
        let att = (-sigma * dt).exp();
        let w = trans * (1.0 - att);
        for k in 0..3 {
            rgb[k] += w * c[k];
        }
        wsum += w;
        trans *= att;
        if trans < 1e-9 {
            break;
        }
    }
    for k in 0..3 {
        rgb[k] += trans * background[k];
    }
    (rgb, wsum, trans)
}

/// Render ground truth for one frame: image, silhouette masks from
/// ray-ellipsoid tests, and projected marker landmarks.
pub fn oracle_render(
    scene: &SceneParams,
    camera: &Camera,
    audio: f64,
    blink: f64,
    steps: usize,
    background: [f64; 3],
) -> OracleFrame {
    let (w, h) = (camera.width, camera.height);
    let mouth = scene.mouth_ellipsoid(audio);
    let eyes = scene.eye_centers.map(|c| super::scene::Ellipsoid {
        center: c,
        radii: scene.eye_radii,
    });

    let rows: Vec<(Vec<f64>, Vec<bool>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|py| {
            let mut img_row = vec![0.0; w * 3];
            let mut face_row = vec![false; w];
            let mut mouth_row = vec![false; w];
            for px in 0..w {
                match camera.generate_ray(px, py) {
                    None => {
                        img_row[px * 3..px * 3 + 3].copy_from_slice(&background);
                    }
                    Some(ray) => {
                        let (rgb, _, _) = oracle_ray(
                            scene, ray.origin, ray.dir, ray.t_near, ray.t_far, steps, audio,
                            blink, background,
                        );
                        img_row[px * 3..px * 3 + 3].copy_from_slice(&rgb);
                        let hits_mouth = mouth.ray_hits(ray.origin, ray.dir);
                        let hits_face = scene.head.ray_hits(ray.origin, ray.dir)
                            || hits_mouth
                            || eyes.iter().any(|e| e.ray_hits(ray.origin, ray.dir));
                        face_row[px] = hits_face;
                        mouth_row[px] = hits_mouth;
                    }
                }
            }
            (img_row, face_row, mouth_row)
        })
        .collect();

    let mut image = Vec::with_capacity(w * h * 3);
    let mut face_mask = Vec::with_capacity(w * h);
    let mut mouth_mask = Vec::with_capacity(w * h);
    for (img_row, face_row, mouth_row) in rows {
        image.extend(img_row);
        face_mask.extend(face_row);
        mouth_mask.extend(mouth_row);
    }

    let landmarks = scene
        .landmarks3(audio)
        .into_iter()
        .filter_map(|(name, p)| {
            camera.project(p).map(|(x, y)| Landmark {
                name: name.to_string(),
                x,
                y,
            })
        })
        .collect();

    OracleFrame {
        width: w,
        height: h,
        image,
        face_mask,
        mouth_mask,
        landmarks,
    }
}

/// Image-only oracle render (used by convergence checks).
pub fn oracle_render_image_only(
    scene: &SceneParams,
    camera: &Camera,
    audio: f64,
    blink: f64,
    steps: usize,
    background: [f64; 3],
) -> Vec<f64> {
    oracle_render(scene, camera, audio, blink, steps, background).image
}
