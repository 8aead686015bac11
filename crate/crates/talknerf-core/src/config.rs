//! Run configuration: one JSON document covering every module's knobs.
//!
//! Unknown keys are rejected at parse time; `validate` enforces the value
//! ranges documented in `schema/config.schema.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// Softmax attention over the quadrature samples of one ray.
    Softmax,
    /// Transformer disabled: attended features are the value vectors ("w/o T").
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionScale {
    /// 1 / sqrt(d_attn), the stable default.
    RsqrtDim,
    /// Literal unscaled logits.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityActivation {
    Softplus,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// sigma = s1+s2, color = density-weighted blend of c1 and c2.
    Weighted,
    /// Literal raw color sum (colors may leave [0,1]).
    RawSum,
    /// Spatial fusion disabled: render the face branch alone ("w/o S").
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeMode {
    /// One compositing pass over per-sample fused (sigma, c).
    Fused,
    /// Composite each branch separately, then add the images.
    PerBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptualSurrogate {
    PyramidMse,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineUpdates {
    MouthOnly,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub n_levels: usize,
    pub features_per_level: usize,
    pub base_resolution: usize,
    pub per_level_scale: f64,
    pub log2_table_size: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            n_levels: 8,
            features_per_level: 2,
            base_resolution: 16,
            per_level_scale: 1.39,
            log2_table_size: 14,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionConfig {
    pub n_freqs_audio: usize,
    pub n_freqs_blink: usize,
    pub hidden: usize,
    pub width: usize,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        Self {
            n_freqs_audio: 6,
            n_freqs_blink: 4,
            hidden: 32,
            width: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub d_attn: usize,
    pub d_v: usize,
    pub geo_dim: usize,
    pub point_hidden: usize,
    pub head_hidden: usize,
    pub head_layers: usize,
    pub n_freqs_dir: usize,
    pub attention: AttentionMode,
    pub attention_scale: AttentionScale,
    /// Whether the face branch consumes audio as its attention query.
    pub face_audio: bool,
    pub density_activation: DensityActivation,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            d_attn: 32,
            d_v: 32,
            geo_dim: 15,
            point_hidden: 64,
            head_hidden: 64,
            head_layers: 2,
            n_freqs_dir: 4,
            attention: AttentionMode::Softmax,
            attention_scale: AttentionScale::RsqrtDim,
            face_audio: true,
            density_activation: DensityActivation::Softplus,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RendererConfig {
    pub train_samples: usize,
    pub eval_samples: usize,
    pub fusion: FusionMode,
    pub compose: ComposeMode,
    pub background: [f64; 3],
}

impl Default for RendererConfig {
    fn default() -> Self {
        Self {
            train_samples: 64,
            eval_samples: 128,
            fusion: FusionMode::Weighted,
            compose: ComposeMode::Fused,
            background: [0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_mouth: f64,
    pub lambda_perc: f64,
    pub patch_size: usize,
    pub perceptual_surrogate: PerceptualSurrogate,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_mouth: 0.001,
            lambda_perc: 0.001,
            patch_size: 32,
            perceptual_surrogate: PerceptualSurrogate::PyramidMse,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub coarse_steps: usize,
    pub fine_steps: usize,
    pub rays_per_step: usize,
    pub lr_tables: f64,
    pub lr_heads: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub fine_updates: FineUpdates,
    /// Steps between held-out evaluations during training.
    pub eval_interval: usize,
    /// Held-out frames rendered per evaluation (0 = all).
    pub eval_frames: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            coarse_steps: 15_000,
            fine_steps: 5_000,
            rays_per_step: 4096,
            lr_tables: 1e-3,
            lr_heads: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            fine_updates: FineUpdates::MouthOnly,
            eval_interval: 1000,
            eval_frames: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_frames: usize,
    pub resolution: usize,
    pub orbit_degrees: f64,
    /// Every k-th frame goes to the holdout split.
    pub holdout_every: usize,
    pub oracle_steps: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_frames: 200,
            resolution: 64,
            orbit_degrees: 10.0,
            holdout_every: 10,
            oracle_steps: 1024,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// 0 means "use all logical cores".
    pub threads: usize,
    pub encoder: EncoderConfig,
    pub condition: ConditionConfig,
    pub field: FieldConfig,
    pub renderer: RendererConfig,
    pub loss: LossConfig,
    pub schedule: ScheduleConfig,
    pub dataset: DatasetConfig,
}

/// Ablation rows mirroring the T / F / S toggle grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationRow {
    Full,
    NoTransformerWithFinetune,
    NoFusionWithFinetune,
    NoTransformerNoFinetune,
    NoFusionNoFinetune,
}

impl AblationRow {
    pub const ALL: [AblationRow; 5] = [
        AblationRow::NoTransformerNoFinetune,
        AblationRow::NoTransformerWithFinetune,
        AblationRow::NoFusionNoFinetune,
        AblationRow::NoFusionWithFinetune,
        AblationRow::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationRow::Full => "w T w S w F",
            AblationRow::NoTransformerWithFinetune => "w/o T w F",
            AblationRow::NoFusionWithFinetune => "w/o S w F",
            AblationRow::NoTransformerNoFinetune => "w/o T w/o F",
            AblationRow::NoFusionNoFinetune => "w/o S w/o F",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" | "w T w S w F" => Some(AblationRow::Full),
            "no-transformer" | "w/o T w F" => Some(AblationRow::NoTransformerWithFinetune),
            "no-fusion" | "w/o S w F" => Some(AblationRow::NoFusionWithFinetune),
            "no-transformer-no-finetune" | "w/o T w/o F" => {
                Some(AblationRow::NoTransformerNoFinetune)
            }
            "no-fusion-no-finetune" | "w/o S w/o F" => Some(AblationRow::NoFusionNoFinetune),
            _ => None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a 64 over the canonical JSON serialization.
    pub fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        fnv1a64(text.as_bytes())
    }

    /// Apply one ablation row's toggles.
    pub fn with_ablation(mut self, row: AblationRow) -> Self {
        match row {
            AblationRow::Full => {}
            AblationRow::NoTransformerWithFinetune => {
                self.field.attention = AttentionMode::None;
            }
            AblationRow::NoFusionWithFinetune => {
                self.renderer.fusion = FusionMode::Off;
            }
            AblationRow::NoTransformerNoFinetune => {
                self.field.attention = AttentionMode::None;
                self.schedule.fine_steps = 0;
            }
            AblationRow::NoFusionNoFinetune => {
                self.renderer.fusion = FusionMode::Off;
                self.schedule.fine_steps = 0;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let e = &self.encoder;
        if e.n_levels == 0 || e.features_per_level == 0 || e.base_resolution < 2 {
            return bad("encoder sizes must be positive (base_resolution >= 2)".into());
        }
        if e.per_level_scale <= 1.0 {
            return bad(format!("per_level_scale must be > 1, got {}", e.per_level_scale));
        }
        if e.log2_table_size == 0 || e.log2_table_size > 24 {
            return bad("log2_table_size must be in 1..=24".into());
        }
        let c = &self.condition;
        if c.n_freqs_audio == 0 || c.n_freqs_blink == 0 || c.hidden == 0 || c.width == 0 {
            return bad("condition sizes must be positive".into());
        }
        let f = &self.field;
        if f.d_attn == 0 || f.d_v == 0 || f.geo_dim == 0 || f.point_hidden == 0 {
            return bad("field sizes must be positive".into());
        }
        if f.head_hidden == 0 || f.head_layers == 0 || f.n_freqs_dir == 0 {
            return bad("head sizes must be positive".into());
        }
        let r = &self.renderer;
        if r.train_samples == 0 || r.eval_samples == 0 {
            return bad("sample counts must be positive".into());
        }
        if r.background.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return bad("background must lie in [0,1]^3".into());
        }
        let l = &self.loss;
        if l.lambda_mouth < 0.0 || l.lambda_perc < 0.0 {
            return bad("loss lambdas must be >= 0".into());
        }
        if l.patch_size < 8 {
            return bad(format!("patch_size must be >= 8, got {}", l.patch_size));
        }
        let s = &self.schedule;
        if s.rays_per_step == 0 {
            return bad("rays_per_step must be positive".into());
        }
        if s.lr_tables <= 0.0 || s.lr_heads <= 0.0 || s.adam_eps <= 0.0 {
            return bad("learning rates and adam_eps must be positive".into());
        }
        if !(0.0 < s.beta1 && s.beta1 < 1.0 && 0.0 < s.beta2 && s.beta2 < 1.0) {
            return bad("beta1, beta2 must lie in (0,1)".into());
        }
        if s.eval_interval == 0 {
            return bad("eval_interval must be positive".into());
        }
        let d = &self.dataset;
        if d.n_frames < 2 {
            return bad("dataset needs n_frames >= 2".into());
        }
        if d.resolution < 8 {
            return bad("resolution must be >= 8".into());
        }
        if d.holdout_every < 2 {
            return bad("holdout_every must be >= 2".into());
        }
        if d.oracle_steps < 256 {
            return bad("oracle_steps must be >= 256".into());
        }
        Ok(())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
