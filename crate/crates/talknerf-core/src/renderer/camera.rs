//! Pinhole camera and scene-box ray generation.

use crate::error::{Error, Result};
use crate::geom::Aabb;

/// Pinhole camera. `rotation` maps camera coordinates to world coordinates
/// (row-major); camera space is x-right, y-up, looking along -z.
#[derive(Debug, Clone)]
pub struct Camera {
    pub position: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
    pub t_near: f64,
    pub t_far: f64,
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl Camera {
    /// Camera at `position` looking at `target` with the given up hint.
    pub fn look_at(
        position: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        focal: f64,
        width: usize,
        height: usize,
    ) -> Self {
        let forward = normalize([
            target[0] - position[0],
            target[1] - position[1],
            target[2] - position[2],
        ]);
        let right = normalize(cross(forward, up));
        let true_up = cross(right, forward);
        let back = [-forward[0], -forward[1], -forward[2]];
        // Columns: right, up, back.
        let rotation = [
            [right[0], true_up[0], back[0]],
            [right[1], true_up[1], back[1]],
            [right[2], true_up[2], back[2]],
        ];
        Self {
            position,
            rotation,
            focal,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(Error::Config(format!("camera focal must be > 0, got {}", self.focal)));
        }
        // Orthonormality within 1e-6.
        for a in 0..3 {
            for b in 0..3 {
                let mut dot = 0.0;
                for i in 0..3 {
                    dot += self.rotation[i][a] * self.rotation[i][b];
                }
                let want = if a == b { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-6 {
                    return Err(Error::Config("camera rotation is not orthonormal".into()));
                }
            }
        }
        Ok(())
    }

    /// World-space direction through the center of pixel (px, py).
    pub fn pixel_dir(&self, px: usize, py: usize) -> [f64; 3] {
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        let x = (px as f64 + 0.5 - cx) / self.focal;
        let y = -(py as f64 + 0.5 - cy) / self.focal;
        let d_cam = [x, y, -1.0];
        let mut d = [0.0; 3];
        for i in 0..3 {
            for c in 0..3 {
                d[i] += self.rotation[i][c] * d_cam[c];
            }
        }
        normalize(d)
    }

    /// Pinhole ray through a pixel center with near/far from the unit-cube
    /// intersection; `None` flags a background ray that misses the scene box.
    pub fn generate_ray(&self, px: usize, py: usize) -> Option<Ray> {
        debug_assert!(px < self.width && py < self.height);
        let dir = self.pixel_dir(px, py);
        let (t_near, t_far) = Aabb::unit_cube().intersect(self.position, dir)?;
        Some(Ray {
            origin: self.position,
            dir,
            t_near,
            t_far,
        })
    }

    /// Project a world point to pixel coordinates; `None` when behind the
    /// camera. The projection inverts `pixel_dir` exactly.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64)> {
        let rel = [
            p[0] - self.position[0],
            p[1] - self.position[1],
            p[2] - self.position[2],
        ];
        let mut cam = [0.0; 3];
        for c in 0..3 {
            for i in 0..3 {
                cam[c] += self.rotation[i][c] * rel[i];
            }
        }
        if cam[2] >= -1e-9 {
            return None;
        }
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        let px = cx + self.focal * (cam[0] / -cam[2]) - 0.5;
        let py = cy - self.focal * (cam[1] / -cam[2]) - 0.5;
        Some((px, py))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frontal(width: usize) -> Camera {
        Camera::look_at(
            [0.5, 0.5, 2.0],
            [0.5, 0.5, 0.5],
            [0.0, 1.0, 0.0],
            80.0,
            width,
            width,
        )
    }

    #[test]
    fn center_pixel_follows_optical_axis() {
        // Odd resolution puts one pixel center exactly on the axis.
        let cam = frontal(65);
        cam.validate().unwrap();
        let d = cam.pixel_dir(32, 32);
        assert!((d[0]).abs() < 1e-12);
        assert!((d[1]).abs() < 1e-12);
        assert!((d[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_pixels_are_mirror_symmetric() {
        let cam = frontal(64);
        let tl = cam.pixel_dir(0, 0);
        let tr = cam.pixel_dir(63, 0);
        let bl = cam.pixel_dir(0, 63);
        assert!((tl[0] + tr[0]).abs() < 1e-12);
        assert!((tl[1] - tr[1]).abs() < 1e-12);
        assert!((tl[1] + bl[1]).abs() < 1e-12);
    }

    #[test]
    fn golden_ray_fixed_pose_and_pixel() {
        // Independent pinhole computation for pixel (10, 20) of a frontal
        // 64x64 camera at (0.5,0.5,2), focal 80: camera axes are identity
        // up to the z flip, so dir_cam = ((10.5-32)/80, -(20.5-32)/80, -1).
        let cam = frontal(64);
        let d = cam.pixel_dir(10, 20);
        let expect = {
            let x = (10.5 - 32.0) / 80.0;
            let y = -(20.5 - 32.0) / 80.0;
            let n = (x * x + y * y + 1.0f64).sqrt();
            [x / n, y / n, -1.0 / n]
        };
        for k in 0..3 {
            assert!((d[k] - expect[k]).abs() < 1e-12, "{:?} vs {:?}", d, expect);
        }
        let ray = cam.generate_ray(10, 20).unwrap();
        assert!(ray.t_near > 0.9 && ray.t_far > ray.t_near);
    }

    #[test]
    fn projection_inverts_ray_generation() {
        let cam = frontal(64);
        for (px, py) in [(0usize, 0usize), (17, 44), (63, 63), (32, 10)] {
            let ray = cam.generate_ray(px, py).unwrap();
            let p = [
                ray.origin[0] + 1.3 * ray.dir[0],
                ray.origin[1] + 1.3 * ray.dir[1],
                ray.origin[2] + 1.3 * ray.dir[2],
            ];
            let (qx, qy) = cam.project(p).unwrap();
            assert!((qx - px as f64).abs() < 1e-9);
            assert!((qy - py as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn ray_missing_cube_is_background() {
        // Tiny focal gives extreme corner rays that miss the unit cube.
        let cam = Camera::look_at(
            [0.5, 0.5, 4.0],
            [0.5, 0.5, 0.5],
            [0.0, 1.0, 0.0],
            4.0,
            64,
            64,
        );
        assert!(cam.generate_ray(0, 0).is_none());
        assert!(cam.generate_ray(32, 32).is_some());
    }
}
