//! Axis-aligned boxes shared by the field branches and the renderer.

use serde::{Deserialize, Serialize};

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn unit_cube() -> Self {
        Self {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Map a world point into this box's local [0,1]^3 coordinates.
    pub fn to_local<T: Real>(&self, p: [f64; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for i in 0..3 {
            let ext = self.max[i] - self.min[i];
            out[i] = T::from_f64((p[i] - self.min[i]) / ext);
        }
        out
    }

    /// Slab intersection; returns entry/exit distances with entry clamped
    /// to zero for origins inside the box.
    pub fn intersect(&self, origin: [f64; 3], dir: [f64; 3]) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-12 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let (mut ta, mut tb) = ((self.min[i] - origin[i]) * inv, (self.max[i] - origin[i]) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        let t0 = t0.max(0.0);
        if t1 <= t0 {
            return None;
        }
        Some((t0, t1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frontal_ray_hits_unit_cube() {
        let cube = Aabb::unit_cube();
        let (t0, t1) = cube.intersect([0.5, 0.5, 2.0], [0.0, 0.0, -1.0]).unwrap();
        assert!((t0 - 1.0).abs() < 1e-12);
        assert!((t1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn miss_returns_none() {
        let cube = Aabb::unit_cube();
        assert!(cube.intersect([2.0, 2.0, 2.0], [0.0, 0.0, -1.0]).is_none());
    }

    #[test]
    fn origin_inside_clamps_entry() {
        let cube = Aabb::unit_cube();
        let (t0, t1) = cube.intersect([0.5, 0.5, 0.5], [0.0, 0.0, -1.0]).unwrap();
        assert_eq!(t0, 0.0);
        assert!((t1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn local_coordinates_span_unit_box() {
        let b = Aabb {
            min: [0.2, 0.4, 0.6],
            max: [0.4, 0.5, 0.8],
        };
        let l: [f64; 3] = b.to_local([0.3, 0.45, 0.7]);
        assert!((l[0] - 0.5).abs() < 1e-12);
        assert!((l[1] - 0.5).abs() < 1e-12);
        assert!((l[2] - 0.5).abs() < 1e-12);
    }
}
