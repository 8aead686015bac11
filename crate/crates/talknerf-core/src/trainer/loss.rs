//! Coarse and fine training losses.
//!
//! Coarse: sum of squared errors over face pixels plus lambda times the sum
//! over mouth pixels (a pixel in both sets contributes to both sums).
//! Fine: patch sum of squared errors plus lambda times a perceptual
//! surrogate (sum of squared errors over a 3-level average-pool pyramid).

use crate::config::PerceptualSurrogate;
use crate::error::{Error, Result};
use crate::real::Real;

/// Per-pixel coarse weight: membership in the face and mouth index sets.
#[inline]
pub fn coarse_pixel_weight<T: Real>(in_face: bool, in_mouth: bool, lambda: T) -> T {
    let mut w = T::zero();
    if in_face {
        w += T::one();
    }
    if in_mouth {
        w += lambda;
    }
    w
}

/// Coarse loss over a sampled pixel batch (`pred`/`gt` are n*3).
pub fn coarse_loss<T: Real>(
    pred: &[T],
    gt: &[T],
    face: &[bool],
    mouth: &[bool],
    lambda: T,
) -> Result<T> {
    let n = face.len();
    assert_eq!(pred.len(), n * 3);
    assert_eq!(gt.len(), n * 3);
    assert_eq!(mouth.len(), n);
    if !face.iter().any(|f| *f) {
        return Err(Error::EmptyFaceSet);
    }
    let mut loss = T::zero();
    for i in 0..n {
        let w = coarse_pixel_weight(face[i], mouth[i], lambda);
        if w == T::zero() {
            continue;
        }
        let mut sq = T::zero();
        for k in 0..3 {
            let d = pred[i * 3 + k] - gt[i * 3 + k];
            sq += d * d;
        }
        loss += w * sq;
    }
    Ok(loss)
}

/// d(coarse)/d(pred), written into `d_pred`.
pub fn coarse_loss_backward<T: Real>(
    pred: &[T],
    gt: &[T],
    face: &[bool],
    mouth: &[bool],
    lambda: T,
    d_pred: &mut [T],
) {
    let two = T::from_f64(2.0);
    for i in 0..face.len() {
        let w = coarse_pixel_weight(face[i], mouth[i], lambda);
        for k in 0..3 {
            d_pred[i * 3 + k] = two * w * (pred[i * 3 + k] - gt[i * 3 + k]);
        }
    }
}

/// 2x average pooling of a row-major RGB image; trailing odd row/col drop.
fn avg_pool2<T: Real>(img: &[T], w: usize, h: usize) -> (Vec<T>, usize, usize) {
    let (ow, oh) = (w / 2, h / 2);
    let quarter = T::from_f64(0.25);
    let mut out = vec![T::zero(); ow * oh * 3];
    for y in 0..oh {
        for x in 0..ow {
            for k in 0..3 {
                let mut acc = T::zero();
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    acc += img[((2 * y + dy) * w + 2 * x + dx) * 3 + k];
                }
                out[(y * ow + x) * 3 + k] = acc * quarter;
            }
        }
    }
    (out, ow, oh)
}

/// Transpose of [`avg_pool2`]: broadcast each pooled gradient over its 2x2
/// source block with weight 1/4, accumulating into `d_img`.
fn avg_pool2_backward<T: Real>(d_out: &[T], ow: usize, oh: usize, d_img: &mut [T], w: usize) {
    let quarter = T::from_f64(0.25);
    for y in 0..oh {
        for x in 0..ow {
            for k in 0..3 {
                let d = d_out[(y * ow + x) * 3 + k] * quarter;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    d_img[((2 * y + dy) * w + 2 * x + dx) * 3 + k] += d;
                }
            }
        }
    }
}

const PYRAMID_LEVELS: usize = 3;

fn sse<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = *x - *y;
            d * d
        })
        .sum()
}

/// Fine loss over one mouth patch (`pred`/`gt` are w*h*3).
pub fn fine_loss<T: Real>(
    pred: &[T],
    gt: &[T],
    w: usize,
    h: usize,
    lambda: T,
    surrogate: PerceptualSurrogate,
) -> T {
    assert_eq!(pred.len(), w * h * 3);
    assert_eq!(gt.len(), w * h * 3);
    let mut loss = sse(pred, gt);
    if surrogate == PerceptualSurrogate::PyramidMse {
        let mut p = pred.to_vec();
        let mut g = gt.to_vec();
        let (mut cw, mut ch) = (w, h);
        let mut pyr = T::zero();
        for _ in 0..PYRAMID_LEVELS {
            let (pn, nw, nh) = avg_pool2(&p, cw, ch);
            let (gn, _, _) = avg_pool2(&g, cw, ch);
            pyr += sse(&pn, &gn);
            p = pn;
            g = gn;
            cw = nw;
            ch = nh;
        }
        loss += lambda * pyr;
    }
    loss
}

/// d(fine)/d(pred), written into `d_pred`.
pub fn fine_loss_backward<T: Real>(
    pred: &[T],
    gt: &[T],
    w: usize,
    h: usize,
    lambda: T,
    surrogate: PerceptualSurrogate,
    d_pred: &mut [T],
) {
    let two = T::from_f64(2.0);
    for i in 0..pred.len() {
        d_pred[i] = two * (pred[i] - gt[i]);
    }
    if surrogate != PerceptualSurrogate::PyramidMse {
        return;
    }
    // Build both pyramids, then chain each level's gradient back through
    // the pooling stack.
    let mut levels_p: Vec<(Vec<T>, usize, usize)> = vec![(pred.to_vec(), w, h)];
    let mut levels_g: Vec<Vec<T>> = vec![gt.to_vec()];
    for l in 0..PYRAMID_LEVELS {
        let (p, cw, ch) = &levels_p[l];
        let (pn, nw, nh) = avg_pool2(p, *cw, *ch);
        let (gn, _, _) = avg_pool2(&levels_g[l], *cw, *ch);
        levels_p.push((pn, nw, nh));
        levels_g.push(gn);
    }
    for l in 1..=PYRAMID_LEVELS {
        let (pl, _, _) = &levels_p[l];
        let gl = &levels_g[l];
        let mut d: Vec<T> = pl
            .iter()
            .zip(gl.iter())
            .map(|(a, b)| two * lambda * (*a - *b))
            .collect();
        // Walk back up to the original resolution.
        for back in (0..l).rev() {
            let (_, bw, bh) = levels_p[back];
            let (_, cw, ch) = levels_p[back + 1];
            let mut d_up = vec![T::zero(); bw * bh * 3];
            avg_pool2_backward(&d, cw, ch, &mut d_up, bw);
            d = d_up;
        }
        for (acc, v) in d_pred.iter_mut().zip(d.iter()) {
            *acc += *v;
        }
    }
}
