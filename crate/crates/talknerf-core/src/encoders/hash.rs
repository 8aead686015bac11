//! Multiresolution 2-D hash grids and their triplane composition.
//!
//! Each plane holds one learnable table per level. Levels whose dense grid
//! fits in the table are indexed densely (collision-free); larger levels
//! fall back to the XOR-prime hash with primes (1, 2654435761).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{GradSink, ParamRegistry, ParamTensor};
use crate::real::Real;

pub const HASH_PRIME_V: u32 = 2_654_435_761;

/// Spread of the uniform table initialization.
pub const TABLE_INIT: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct HashGridConfig {
    pub n_levels: usize,
    pub features_per_level: usize,
    pub base_resolution: usize,
    pub per_level_scale: f64,
    pub log2_table_size: usize,
}

impl HashGridConfig {
    pub fn table_size(&self) -> usize {
        1 << self.log2_table_size
    }

    /// Grid vertices per axis at `level`: floor(N_min * b^level).
    pub fn level_resolution(&self, level: usize) -> usize {
        (self.base_resolution as f64 * self.per_level_scale.powi(level as i32)).floor() as usize
    }

    pub fn is_dense(&self, level: usize) -> bool {
        let r = self.level_resolution(level);
        r * r <= self.table_size()
    }

    /// Allocated rows for `level`: dense levels only need their grid.
    pub fn level_rows(&self, level: usize) -> usize {
        let r = self.level_resolution(level);
        (r * r).min(self.table_size())
    }

    pub fn feature_dim(&self) -> usize {
        self.n_levels * self.features_per_level
    }
}

impl From<&crate::config::EncoderConfig> for HashGridConfig {
    fn from(c: &crate::config::EncoderConfig) -> Self {
        Self {
            n_levels: c.n_levels,
            features_per_level: c.features_per_level,
            base_resolution: c.base_resolution,
            per_level_scale: c.per_level_scale,
            log2_table_size: c.log2_table_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneId {
    Xy,
    Yz,
    Xz,
}

impl PlaneId {
    pub fn tag(self) -> &'static str {
        match self {
            PlaneId::Xy => "xy",
            PlaneId::Yz => "yz",
            PlaneId::Xz => "xz",
        }
    }

    /// Project a 3-D point onto this plane's two coordinates.
    #[inline]
    pub fn project<T: Real>(self, p: [T; 3]) -> (T, T) {
        match self {
            PlaneId::Xy => (p[0], p[1]),
            PlaneId::Yz => (p[1], p[2]),
            PlaneId::Xz => (p[0], p[2]),
        }
    }
}

/// XOR-prime corner hash, wrapping u32 arithmetic, reduced mod `table_size`.
#[inline]
pub fn hash_index(u: u32, v: u32, table_size: usize) -> usize {
    let h = u ^ v.wrapping_mul(HASH_PRIME_V);
    (h as usize) % table_size
}

/// Bilinear footprint of one query at one level: 4 rows and weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlaneQuery<T: Real> {
    pub rows: [usize; 4],
    pub w: [T; 4],
}

#[derive(Debug, Clone)]
pub struct PlaneHashTable<T: Real> {
    pub plane: PlaneId,
    pub levels: Vec<ParamTensor<T>>,
    pub cfg: HashGridConfig,
}

impl<T: Real> PlaneHashTable<T> {
    pub fn new(
        reg: &mut ParamRegistry,
        name_prefix: &str,
        plane: PlaneId,
        cfg: HashGridConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let c = cfg.features_per_level;
        let levels = (0..cfg.n_levels)
            .map(|l| {
                let rows = cfg.level_rows(l);
                let values = (0..rows * c)
                    .map(|_| T::from_f64(rng.gen_range(-TABLE_INIT..TABLE_INIT)))
                    .collect();
                ParamTensor::new(
                    reg.issue(),
                    format!("{name_prefix}.hash.{}.l{l}", plane.tag()),
                    vec![rows, c],
                    values,
                )
            })
            .collect();
        Self { plane, levels, cfg }
    }

    /// Row index for an integer corner at `level`.
    #[inline]
    pub fn corner_index(&self, level: usize, u: usize, v: usize) -> usize {
        let res = self.cfg.level_resolution(level);
        if self.cfg.is_dense(level) {
            v * res + u
        } else {
            hash_index(u as u32, v as u32, self.cfg.table_size())
        }
    }

    /// Bilinear interpolation at `(u, v)` in the unit square (clamped).
    ///
    /// Writes `n_levels * features_per_level` values into `out` and the
    /// per-level corner footprint into `queries`.
    pub fn encode(&self, u: T, v: T, out: &mut [T], queries: &mut [PlaneQuery<T>]) {
        let c = self.cfg.features_per_level;
        debug_assert_eq!(out.len(), self.cfg.feature_dim());
        debug_assert_eq!(queries.len(), self.cfg.n_levels);
        let u = u.max(T::zero()).min(T::one());
        let v = v.max(T::zero()).min(T::one());
        for (level, table) in self.levels.iter().enumerate() {
            let res = self.cfg.level_resolution(level);
            let scale = T::from_f64((res - 1) as f64);
            let uf = u * scale;
            let vf = v * scale;
            let i0 = (uf.floor().as_f64() as usize).min(res - 2);
            let j0 = (vf.floor().as_f64() as usize).min(res - 2);
            let fu = uf - T::from_f64(i0 as f64);
            let fv = vf - T::from_f64(j0 as f64);
            let one = T::one();
            let q = PlaneQuery {
                rows: [
                    self.corner_index(level, i0, j0),
                    self.corner_index(level, i0 + 1, j0),
                    self.corner_index(level, i0, j0 + 1),
                    self.corner_index(level, i0 + 1, j0 + 1),
                ],
                w: [
                    (one - fu) * (one - fv),
                    fu * (one - fv),
                    (one - fu) * fv,
                    fu * fv,
                ],
            };
            let dst = &mut out[level * c..(level + 1) * c];
            dst.iter_mut().for_each(|d| *d = T::zero());
            for k in 0..4 {
                let row = &table.values[q.rows[k] * c..(q.rows[k] + 1) * c];
                for (d, r) in dst.iter_mut().zip(row.iter()) {
                    *d += q.w[k] * *r;
                }
            }
            queries[level] = q;
        }
    }

    /// Scatter `dfeat` back into the 4 touched rows per level.
    pub fn backward(&self, queries: &[PlaneQuery<T>], dfeat: &[T], g: &mut GradSink<T>) {
        let c = self.cfg.features_per_level;
        for (level, q) in queries.iter().enumerate() {
            let id = self.levels[level].id;
            let df = &dfeat[level * c..(level + 1) * c];
            let buf = g.buf_mut(id);
            for k in 0..4 {
                let dst = &mut buf[q.rows[k] * c..(q.rows[k] + 1) * c];
                for (d, s) in dst.iter_mut().zip(df.iter()) {
                    *d += q.w[k] * *s;
                }
            }
        }
    }
}

/// Three axis-aligned plane tables; output is the concatenation
/// XY(x,y) | YZ(y,z) | XZ(x,z), length `3 * L * C`.
#[derive(Debug, Clone)]
pub struct TriplaneEncoder<T: Real> {
    pub planes: [PlaneHashTable<T>; 3],
}

impl<T: Real> TriplaneEncoder<T> {
    pub fn new(
        reg: &mut ParamRegistry,
        name_prefix: &str,
        cfg: HashGridConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let planes = [
            PlaneHashTable::new(reg, name_prefix, PlaneId::Xy, cfg.clone(), rng),
            PlaneHashTable::new(reg, name_prefix, PlaneId::Yz, cfg.clone(), rng),
            PlaneHashTable::new(reg, name_prefix, PlaneId::Xz, cfg, rng),
        ];
        Self { planes }
    }

    pub fn cfg(&self) -> &HashGridConfig {
        &self.planes[0].cfg
    }

    pub fn out_dim(&self) -> usize {
        3 * self.cfg().feature_dim()
    }

    pub fn n_levels(&self) -> usize {
        self.cfg().n_levels
    }

    /// Encode a point in the unit cube. Out-of-cube inputs are clamped and
    /// flagged via the return value.
    pub fn encode(&self, p: [T; 3], out: &mut [T], queries: &mut [PlaneQuery<T>]) -> bool {
        debug_assert_eq!(out.len(), self.out_dim());
        debug_assert_eq!(queries.len(), 3 * self.n_levels());
        let clamped = p
            .iter()
            .any(|&c| c < T::zero() || c > T::one());
        let dim = self.cfg().feature_dim();
        let nl = self.n_levels();
        for (i, plane) in self.planes.iter().enumerate() {
            let (u, v) = plane.plane.project(p);
            plane.encode(
                u,
                v,
                &mut out[i * dim..(i + 1) * dim],
                &mut queries[i * nl..(i + 1) * nl],
            );
        }
        clamped
    }

    pub fn backward(&self, queries: &[PlaneQuery<T>], dfeat: &[T], g: &mut GradSink<T>) {
        let dim = self.cfg().feature_dim();
        let nl = self.n_levels();
        for (i, plane) in self.planes.iter().enumerate() {
            plane.backward(
                &queries[i * nl..(i + 1) * nl],
                &dfeat[i * dim..(i + 1) * dim],
                g,
            );
        }
    }

    pub fn tensors(&self) -> Vec<&ParamTensor<T>> {
        self.planes
            .iter()
            .flat_map(|p| p.levels.iter())
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        self.planes
            .iter_mut()
            .flat_map(|p| p.levels.iter_mut())
            .collect()
    }
}
