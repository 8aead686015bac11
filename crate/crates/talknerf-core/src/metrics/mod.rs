//! Quantitative evaluation: PSNR, mouth-region PSNR, and landmark distance.

pub mod evaluate;
pub mod landmarks;
pub mod psnr;

pub use evaluate::{evaluate_frames, EvalReport, FrameEval};
pub use landmarks::{lmd, locate_landmarks};
pub use psnr::{psnr, PsnrValue, PSNR_CAP_DB};
