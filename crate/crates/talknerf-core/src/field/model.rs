//! The complete dual-branch field: shared condition net plus mouth and
//! face radiance branches registered in one tensor namespace.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::diffcore::{ParamRegistry, ParamTensor};
use crate::encoders::freq::{freq_dim, frequency_encode};
use crate::geom::Aabb;
use crate::real::Real;

use super::branch::RadianceBranch;
use super::condition::ConditionNet;

const MODEL_INIT_SALT: u64 = 0x6d6f_64656c;

#[derive(Debug, Clone)]
pub struct FieldModel<T: Real> {
    pub cond: ConditionNet<T>,
    pub mouth: RadianceBranch<T>,
    pub face: RadianceBranch<T>,
    pub face_audio: bool,
    pub n_freqs_audio: usize,
    pub n_freqs_dir: usize,
    /// Audio query input used by the face branch when its audio is ablated.
    pub zero_audio_vec: Vec<T>,
    n_tensors: usize,
}

impl<T: Real> FieldModel<T> {
    pub fn new(cfg: &RunConfig, mouth_bbox: Aabb) -> Self {
        let mut reg = ParamRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ MODEL_INIT_SALT);
        let cond = ConditionNet::new(
            &mut reg,
            cfg.condition.n_freqs_audio,
            cfg.condition.n_freqs_blink,
            cfg.condition.hidden,
            cfg.condition.width,
            &mut rng,
        );
        let width = cond.width();
        let mouth = RadianceBranch::new(&mut reg, "mouth", cfg, mouth_bbox, width, &mut rng);
        let face = RadianceBranch::new(&mut reg, "face", cfg, Aabb::unit_cube(), width, &mut rng);

        let n_freqs_audio = cfg.condition.n_freqs_audio;
        let mut zero_audio_vec = vec![T::zero(); freq_dim(1, n_freqs_audio)];
        frequency_encode(&[T::zero()], n_freqs_audio, &mut zero_audio_vec);

        let model = Self {
            cond,
            mouth,
            face,
            face_audio: cfg.field.face_audio,
            n_freqs_audio,
            n_freqs_dir: cfg.field.n_freqs_dir,
            zero_audio_vec,
            n_tensors: reg.count(),
        };
        debug_assert!(model
            .tensors()
            .iter()
            .enumerate()
            .all(|(i, t)| t.id == i));
        model
    }

    pub fn n_tensors(&self) -> usize {
        self.n_tensors
    }

    pub fn cond_width(&self) -> usize {
        self.cond.width()
    }

    pub fn dir_dim(&self) -> usize {
        freq_dim(3, self.n_freqs_dir)
    }

    /// Lifted audio vector serving as the attention query input.
    pub fn audio_vec(&self, audio: T) -> Vec<T> {
        let mut v = vec![T::zero(); freq_dim(1, self.n_freqs_audio)];
        frequency_encode(&[audio], self.n_freqs_audio, &mut v);
        v
    }

    /// Query input for the face branch, honoring the audio ablation.
    pub fn face_audio_vec<'a>(&'a self, a_vec: &'a [T]) -> &'a [T] {
        if self.face_audio {
            a_vec
        } else {
            &self.zero_audio_vec
        }
    }

    /// All tensors in registration order (ids are positions).
    pub fn tensors(&self) -> Vec<&ParamTensor<T>> {
        let mut v = self.cond.tensors();
        v.extend(self.mouth.tensors());
        v.extend(self.face.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut v = self.cond.tensors_mut();
        v.extend(self.mouth.tensors_mut());
        v.extend(self.face.tensors_mut());
        v
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in self.tensors_mut() {
            t.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.encoder.n_levels = 4;
        cfg.encoder.base_resolution = 4;
        cfg.encoder.per_level_scale = 2.0;
        cfg.encoder.log2_table_size = 8;
        cfg.condition.hidden = 8;
        cfg.condition.width = 6;
        cfg.field.d_attn = 8;
        cfg.field.d_v = 8;
        cfg.field.geo_dim = 5;
        cfg.field.point_hidden = 8;
        cfg.field.head_hidden = 8;
        cfg.field.head_layers = 1;
        cfg.field.n_freqs_dir = 2;
        cfg
    }

    fn mouth_box() -> Aabb {
        Aabb {
            min: [0.4, 0.3, 0.6],
            max: [0.6, 0.5, 0.75],
        }
    }

    #[test]
    fn tensor_ids_are_positions() {
        let m: FieldModel<f32> = FieldModel::new(&small_cfg(), mouth_box());
        for (i, t) in m.tensors().iter().enumerate() {
            assert_eq!(t.id, i, "tensor {} out of order", t.name);
        }
        assert_eq!(m.tensors().len(), m.n_tensors());
    }

    #[test]
    fn names_are_unique_and_prefixed() {
        let m: FieldModel<f32> = FieldModel::new(&small_cfg(), mouth_box());
        let names: Vec<&str> = m.tensors().iter().map(|t| t.name.as_str()).collect();
        let mut dedup = names.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        assert!(names.iter().any(|n| n.starts_with("cond.")));
        assert!(names.iter().any(|n| n.starts_with("mouth.hash.")));
        assert!(names.iter().any(|n| n.starts_with("face.color.")));
    }

    #[test]
    fn same_seed_same_init() {
        let a: FieldModel<f32> = FieldModel::new(&small_cfg(), mouth_box());
        let b: FieldModel<f32> = FieldModel::new(&small_cfg(), mouth_box());
        for (x, y) in a.tensors().iter().zip(b.tensors().iter()) {
            assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn f32_and_f64_share_init_sequence() {
        let a: FieldModel<f32> = FieldModel::new(&small_cfg(), mouth_box());
        let b: FieldModel<f64> = FieldModel::new(&small_cfg(), mouth_box());
        for (x, y) in a.tensors().iter().zip(b.tensors().iter()) {
            for (u, v) in x.values.iter().zip(y.values.iter()) {
                assert!((u.as_f64() - v.as_f64()).abs() < 1e-7);
            }
        }
    }
}
