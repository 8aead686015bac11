//! Synthetic "talking blob" scene: closed-form density and color fields
//! driven by scalar audio/blink signals, an independent oracle renderer,
//! and dataset generation. Source of ground truth and golden values.

pub mod dataset;
pub mod oracle;
pub mod scene;
pub mod signal;

pub use dataset::{gen_dataset, load_dataset, LoadedDataset, LoadedFrame, Manifest};
pub use oracle::{oracle_render, oracle_render_image_only, OracleFrame};
pub use scene::{Ellipsoid, SceneParams};
pub use signal::{blink_signal, pseudo_speech};
