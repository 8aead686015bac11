//! Peak signal-to-noise ratio over [0,1] images.

use crate::error::{Error, Result};

/// Identical images report this value with the `capped` flag set.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, Copy)]
pub struct PsnrValue {
    pub db: f64,
    pub capped: bool,
}

/// 10 log10(1 / MSE) over (optionally masked) pixels; images are row-major
/// RGB and the mask is per pixel.
pub fn psnr(a: &[f32], b: &[f32], mask: Option<&[bool]>) -> Result<PsnrValue> {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.len() % 3, 0);
    let n_px = a.len() / 3;
    if let Some(m) = mask {
        assert_eq!(m.len(), n_px);
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for px in 0..n_px {
        if mask.map_or(true, |m| m[px]) {
            for k in 0..3 {
                let d = (a[px * 3 + k] - b[px * 3 + k]) as f64;
                sum += d * d;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mse = sum / (count * 3) as f64;
    if mse == 0.0 {
        return Ok(PsnrValue {
            db: PSNR_CAP_DB,
            capped: true,
        });
    }
    let db = 10.0 * (1.0 / mse).log10();
    if db > PSNR_CAP_DB {
        Ok(PsnrValue {
            db: PSNR_CAP_DB,
            capped: true,
        })
    } else {
        Ok(PsnrValue { db, capped: false })
    }
}
