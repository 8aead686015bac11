//! Closed-form scene fields: a head ellipsoid with a mouth whose vertical
//! radius opens with |audio| and eye discs whose color fades to skin with
//! blink.

use crate::geom::Aabb;

#[derive(Debug, Clone, Copy)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub radii: [f64; 3],
}

impl Ellipsoid {
    /// Normalized squared radius: 1 on the surface, 0 at the center.
    pub fn rho2(&self, p: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            let q = (p[i] - self.center[i]) / self.radii[i];
            acc += q * q;
        }
        acc
    }

    /// Does the ray o + t d (t > 0) intersect this ellipsoid?
    pub fn ray_hits(&self, o: [f64; 3], d: [f64; 3]) -> bool {
        let mut a = 0.0;
        let mut b = 0.0;
        let mut c = -1.0;
        for i in 0..3 {
            let di = d[i] / self.radii[i];
            let oi = (o[i] - self.center[i]) / self.radii[i];
            a += di * di;
            b += 2.0 * di * oi;
            c += oi * oi;
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return false;
        }
        let sq = disc.sqrt();
        let t1 = (-b + sq) / (2.0 * a);
        t1 > 0.0
    }
}

/// C1-smooth compactly supported falloff kernel.
#[inline]
fn falloff(rho2: f64) -> f64 {
    if rho2 >= 1.0 {
        0.0
    } else {
        let u = 1.0 - rho2;
        u * u
    }
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

#[derive(Debug, Clone)]
pub struct SceneParams {
    pub head: Ellipsoid,
    pub head_peak: f64,
    pub skin_color: [f64; 3],
    pub mouth_center: [f64; 3],
    pub mouth_base_radii: [f64; 3],
    /// Vertical mouth radius change per unit |audio|.
    pub mouth_gain: f64,
    pub mouth_peak: f64,
    pub mouth_color: [f64; 3],
    pub eye_centers: [[f64; 3]; 2],
    pub eye_radii: [f64; 3],
    pub eye_peak: f64,
    pub eye_color: [f64; 3],
    /// How far blink pulls eye color toward skin at e = 1.
    pub blink_strength: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            head: Ellipsoid {
                center: [0.5, 0.5, 0.5],
                radii: [0.24, 0.28, 0.22],
            },
            head_peak: 60.0,
            skin_color: [0.85, 0.62, 0.50],
            mouth_center: [0.5, 0.40, 0.67],
            mouth_base_radii: [0.085, 0.022, 0.045],
            mouth_gain: 0.055,
            mouth_peak: 250.0,
            mouth_color: [0.45, 0.10, 0.12],
            eye_centers: [[0.415, 0.585, 0.66], [0.585, 0.585, 0.66]],
            eye_radii: [0.038, 0.024, 0.02],
            eye_peak: 250.0,
            eye_color: [0.95, 0.95, 0.97],
            blink_strength: 1.0,
        }
    }
}

impl SceneParams {
    /// Mouth ellipsoid at a given audio amplitude (|a| symmetry).
    pub fn mouth_ellipsoid(&self, audio: f64) -> Ellipsoid {
        let mut radii = self.mouth_base_radii;
        radii[1] += self.mouth_gain * audio.abs();
        Ellipsoid {
            center: self.mouth_center,
            radii,
        }
    }

    /// Maximal mouth extent over audio in [-1,1], padded; the mouth
    /// branch's bounding box.
    pub fn mouth_bbox(&self) -> Aabb {
        let margin = 0.03;
        let rx = self.mouth_base_radii[0] + margin;
        let ry = self.mouth_base_radii[1] + self.mouth_gain + margin;
        let rz = self.mouth_base_radii[2] + margin;
        let c = self.mouth_center;
        Aabb {
            min: [
                (c[0] - rx).max(0.0),
                (c[1] - ry).max(0.0),
                (c[2] - rz).max(0.0),
            ],
            max: [
                (c[0] + rx).min(1.0),
                (c[1] + ry).min(1.0),
                (c[2] + rz).min(1.0),
            ],
        }
    }

    /// Effective eye color after blink darkening.
    pub fn eye_color_at(&self, blink: f64) -> [f64; 3] {
        lerp3(
            self.eye_color,
            self.skin_color,
            (blink * self.blink_strength).clamp(0.0, 1.0),
        )
    }

    /// The analytic field: density and color at a point for condition (a, e).
    pub fn density_color(&self, p: [f64; 3], audio: f64, blink: f64) -> (f64, [f64; 3]) {
        let s_head = self.head_peak * falloff(self.head.rho2(p));
        let s_mouth = self.mouth_peak * falloff(self.mouth_ellipsoid(audio).rho2(p));
        let eye = Ellipsoid {
            center: self.eye_centers[0],
            radii: self.eye_radii,
        };
        let s_eye_l = self.eye_peak * falloff(eye.rho2(p));
        let eye_r = Ellipsoid {
            center: self.eye_centers[1],
            radii: self.eye_radii,
        };
        let s_eye_r = self.eye_peak * falloff(eye_r.rho2(p));

        let sigma = s_head + s_mouth + s_eye_l + s_eye_r;
        if sigma <= 1e-12 {
            return (0.0, self.skin_color);
        }
        let ec = self.eye_color_at(blink);
        let mut c = [0.0; 3];
        for k in 0..3 {
            c[k] = (s_head * self.skin_color[k]
                + s_mouth * self.mouth_color[k]
                + (s_eye_l + s_eye_r) * ec[k])
                / sigma;
        }
        (sigma, c)
    }

    /// Marker points whose projections are the frame landmarks.
    pub fn landmarks3(&self, audio: f64) -> Vec<(&'static str, [f64; 3])> {
        let m = self.mouth_ellipsoid(audio);
        let c = m.center;
        vec![
            ("mouth_left", [c[0] - m.radii[0], c[1], c[2]]),
            ("mouth_right", [c[0] + m.radii[0], c[1], c[2]]),
            ("lip_upper", [c[0], c[1] + m.radii[1], c[2]]),
            ("lip_lower", [c[0], c[1] - m.radii[1], c[2]]),
            ("eye_left", self.eye_centers[0]),
            ("eye_right", self.eye_centers[1]),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_center_hits_peak_density() {
        let sc = SceneParams::default();
        let (sigma, c) = sc.density_color([0.5, 0.5, 0.5], 0.0, 0.0);
        assert!((sigma - sc.head_peak).abs() < 1e-12);
        assert_eq!(c, sc.skin_color);
    }

    #[test]
    fn audio_sign_symmetry() {
        let sc = SceneParams::default();
        for p in [[0.5, 0.42, 0.68], [0.52, 0.38, 0.65], [0.3, 0.3, 0.3]] {
            let a = sc.density_color(p, 0.8, 0.0);
            let b = sc.density_color(p, -0.8, 0.0);
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn far_outside_is_empty() {
        let sc = SceneParams::default();
        let (sigma, _) = sc.density_color([0.02, 0.02, 0.02], 0.5, 0.5);
        assert_eq!(sigma, 0.0);
    }

    #[test]
    fn mouth_opens_with_audio() {
        let sc = SceneParams::default();
        let closed = sc.mouth_ellipsoid(0.0);
        let open = sc.mouth_ellipsoid(1.0);
        assert!(open.radii[1] > closed.radii[1]);
        assert_eq!(open.radii[0], closed.radii[0]);
        // A point above the closed lip is inside only when open.
        let probe = [0.5, sc.mouth_center[1] + 0.05, sc.mouth_center[2]];
        assert!(closed.rho2(probe) > 1.0);
        assert!(open.rho2(probe) < 1.0);
    }

    #[test]
    fn blink_moves_eye_color_toward_skin() {
        let sc = SceneParams::default();
        let open = sc.eye_color_at(0.0);
        let shut = sc.eye_color_at(1.0);
        assert_eq!(open, sc.eye_color);
        assert_eq!(shut, sc.skin_color);
    }

    #[test]
    fn mouth_bbox_contains_extents_and_fits_cube() {
        let sc = SceneParams::default();
        let bb = sc.mouth_bbox();
        let open = sc.mouth_ellipsoid(1.0);
        assert!(bb.contains([
            open.center[0] - open.radii[0],
            open.center[1] - open.radii[1],
            open.center[2] - open.radii[2]
        ]));
        assert!(bb.contains([
            open.center[0] + open.radii[0],
            open.center[1] + open.radii[1],
            open.center[2] + open.radii[2]
        ]));
        assert!(Aabb::unit_cube().contains(bb.min));
        assert!(Aabb::unit_cube().contains(bb.max));
    }

    #[test]
    fn geometry_inside_unit_cube() {
        let sc = SceneParams::default();
        for i in 0..3 {
            assert!(sc.head.center[i] - sc.head.radii[i] >= 0.0);
            assert!(sc.head.center[i] + sc.head.radii[i] <= 1.0);
        }
    }

    #[test]
    fn ray_ellipsoid_hit_test() {
        let e = Ellipsoid {
            center: [0.5, 0.5, 0.5],
            radii: [0.2, 0.2, 0.2],
        };
        assert!(e.ray_hits([0.5, 0.5, 2.0], [0.0, 0.0, -1.0]));
        assert!(!e.ray_hits([0.5, 0.9, 2.0], [0.0, 0.0, -1.0]));
        // Behind the origin: no hit.
        assert!(!e.ray_hits([0.5, 0.5, 2.0], [0.0, 0.0, 1.0]));
    }
}
