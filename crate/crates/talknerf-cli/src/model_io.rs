//! Rebuilding a model from a run directory's config and checkpoint.

use std::path::Path;

use talknerf_core::config::RunConfig;
use talknerf_core::diffcore::AdamState;
use talknerf_core::error::Error as CoreError;
use talknerf_core::synth::LoadedDataset;
use talknerf_core::trainer::load_checkpoint;
use talknerf_core::trainer::train::restore_state;
use talknerf_core::FieldModel;

/// Load config + checkpoint into an eval-ready model. The config defaults
/// to `config.json` beside the checkpoint.
pub fn load_model_for_eval(
    checkpoint: &Path,
    config: Option<&Path>,
    dataset: &LoadedDataset,
) -> anyhow::Result<(FieldModel<f32>, RunConfig)> {
    let config_path = match config {
        Some(p) => p.to_path_buf(),
        None => checkpoint
            .parent()
            .map(|p| p.join("config.json"))
            .filter(|p| p.exists())
            .ok_or_else(|| {
                CoreError::Config(
                    "no --config given and no config.json next to the checkpoint".into(),
                )
            })?,
    };
    let cfg = RunConfig::from_file(&config_path)?;
    if cfg.dataset.resolution != dataset.resolution() {
        return Err(CoreError::Config(format!(
            "config resolution {} does not match dataset resolution {}",
            cfg.dataset.resolution,
            dataset.resolution()
        ))
        .into());
    }
    let mut model: FieldModel<f32> = FieldModel::new(&cfg, dataset.manifest.mouth_bbox);
    let mut adam: Vec<AdamState<f32>> = model
        .tensors()
        .iter()
        .map(|t| AdamState::zeros(t.len()))
        .collect();
    let tensors = load_checkpoint(checkpoint)?;
    restore_state(tensors, &mut model, &mut adam, cfg.hash())?;
    Ok((model, cfg))
}
