//! The spatial-shift operation on `[w, h, c]` (or batched `[B, w, h, c]`)
//! feature maps.
//!
//! For a group with displacement `(dx, dy)` the output is
//! `out[x, y] = in[x − dx, y − dy]` where that source exists, and
//! `out[x, y] = in[x, y]` on the boundary strip it would have come from.
//! The output is always built from an untouched copy of the input.

use crate::error::{Error, Result};
use crate::shift::ShiftConfig;
use crate::tensor::{Scalar, Tensor};

fn dims(t: &Tensor<impl Scalar>) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [w, h, c] => Ok((1, w, h, c)),
        [b, w, h, c] => Ok((b, w, h, c)),
        _ => Err(Error::shape(format!(
            "spatial shift expects [w, h, c] or [B, w, h, c], got {:?}",
            t.shape()
        ))),
    }
}

/// Visits every copy `out[dst] = in[src]` made by the forward map, as flat
/// offsets of a single `[w, h, c]` image.
fn for_each_copy(
    w: usize,
    h: usize,
    c: usize,
    cfg: &ShiftConfig,
    mut copy: impl FnMut(usize, usize, std::ops::Range<usize>),
) {
    for (channels, d) in cfg.group_ranges(c) {
        for x in 0..w {
            for y in 0..h {
                let sx = x as i64 - d.dx as i64;
                let sy = y as i64 - d.dy as i64;
                let inside = (0..w as i64).contains(&sx) && (0..h as i64).contains(&sy);
                let (sx, sy) = if inside {
                    (sx as usize, sy as usize)
                } else {
                    (x, y)
                };
                let dst = (x * h + y) * c;
                let src = (sx * h + sy) * c;
                copy(dst, src, channels.clone());
            }
        }
    }
}

pub fn spatial_shift_forward<T: Scalar>(t: &Tensor<T>, cfg: &ShiftConfig) -> Result<Tensor<T>> {
    let (b, w, h, c) = dims(t)?;
    cfg.validate(w, h, c)?;
    let mut out = t.clone();
    let image = w * h * c;
    for (src_img, dst_img) in t.data().chunks(image).zip(out.data_mut().chunks_mut(image)) {
        for_each_copy(w, h, c, cfg, |dst, src, ch| {
            dst_img[dst + ch.start..dst + ch.end]
                .copy_from_slice(&src_img[src + ch.start..src + ch.end]);
        });
    }
    debug_assert_eq!(out.numel(), b * image);
    Ok(out)
}

/// Adjoint of [`spatial_shift_forward`]: every forward copy `out[q] = in[p]`
/// contributes `dx[p] += dy[q]`.
pub fn spatial_shift_backward<T: Scalar>(cfg: &ShiftConfig, dy: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, w, h, c) = dims(dy)?;
    cfg.validate(w, h, c)?;
    if cfg.is_identity() {
        return Ok(dy.clone());
    }
    // every channel belongs to exactly one group
    let mut dx = dy.zeros_like();
    let image = w * h * c;
    for (dy_img, dx_img) in dy.data().chunks(image).zip(dx.data_mut().chunks_mut(image)) {
        for_each_copy(w, h, c, cfg, |dst, src, ch| {
            for k in ch {
                dx_img[src + k] = dx_img[src + k] + dy_img[dst + k];
            }
        });
    }
    Ok(dx)
}
