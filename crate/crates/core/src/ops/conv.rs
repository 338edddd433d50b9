//! Depthwise 3×3 convolution, used as an independent oracle for the shift.
//!
//! Kernels are stored as `[c, 3, 3]` with the row index running along the
//! height axis and the column index along the width axis, so that
//! `out[x, y, i] = Σ K[i, ky, kx] · in[x + kx − 1, y + ky − 1, i]` with zero
//! padding of one position on every side.

use crate::error::{Error, Result};
use crate::shift::ShiftConfig;
use crate::tensor::{Scalar, Tensor};

fn check(t: &Tensor<impl Scalar>, kernels: &Tensor<impl Scalar>) -> Result<(usize, usize, usize)> {
    let [w, h, c] = *t.shape() else {
        return Err(Error::shape(format!(
            "depthwise conv expects [w, h, c], got {:?}",
            t.shape()
        )));
    };
    if kernels.shape() != [c, 3, 3] {
        return Err(Error::shape(format!(
            "depthwise conv: kernels {:?} do not match {c} channels (want [{c}, 3, 3])",
            kernels.shape()
        )));
    }
    Ok((w, h, c))
}

/// Calls `f(dst_offset, src_offset, kernel_offset)` for every in-bounds tap.
fn for_each_tap(w: usize, h: usize, c: usize, mut f: impl FnMut(usize, usize, usize)) {
    for x in 0..w {
        for y in 0..h {
            for ky in 0..3 {
                let sy = y as i64 + ky as i64 - 1;
                if !(0..h as i64).contains(&sy) {
                    continue;
                }
                for kx in 0..3 {
                    let sx = x as i64 + kx as i64 - 1;
                    if !(0..w as i64).contains(&sx) {
                        continue;
                    }
                    let dst = (x * h + y) * c;
                    let src = (sx as usize * h + sy as usize) * c;
                    for i in 0..c {
                        f(dst + i, src + i, i * 9 + ky * 3 + kx);
                    }
                }
            }
        }
    }
}

pub fn depthwise_conv3x3_forward<T: Scalar>(
    t: &Tensor<T>,
    kernels: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (w, h, c) = check(t, kernels)?;
    let mut out = t.zeros_like();
    let (src, k) = (t.data(), kernels.data());
    let dst = out.data_mut();
    for_each_tap(w, h, c, |o, i, ki| dst[o] = dst[o] + k[ki] * src[i]);
    Ok(out)
}

/// Returns `(d_input, d_kernels)`.
pub fn depthwise_conv3x3_backward<T: Scalar>(
    t: &Tensor<T>,
    kernels: &Tensor<T>,
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    check(t, kernels)?;
    if dy.shape() != t.shape() {
        return Err(Error::shape(format!(
            "depthwise conv backward: gradient {:?} does not match {:?}",
            dy.shape(),
            t.shape()
        )));
    }
    let (w, h, c) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut dx = t.zeros_like();
    let mut dk = kernels.zeros_like();
    let (src, k, g) = (t.data(), kernels.data(), dy.data());
    {
        let (dxd, dkd) = (dx.data_mut(), dk.data_mut());
        for_each_tap(w, h, c, |o, i, ki| {
            dxd[i] = dxd[i] + k[ki] * g[o];
            dkd[ki] = dkd[ki] + src[i] * g[o];
        });
    }
    Ok((dx, dk))
}

/// Fixed kernels reproducing `cfg` as a depthwise convolution: channels of
/// a group with displacement `(dx, dy)` get a single 1 at row `1 − dy`,
/// column `1 − dx`, which selects input `(x − dx, y − dy)`. The identity
/// configuration yields centre-delta kernels.
pub fn build_shift_kernels<T: Scalar>(cfg: &ShiftConfig, channels: usize) -> Result<Tensor<T>> {
    cfg.validate_channels(channels)?;
    let mut kernels = Tensor::zeros(&[channels, 3, 3])?;
    let data = kernels.data_mut();
    if cfg.is_identity() {
        for i in 0..channels {
            data[i * 9 + 4] = T::one();
        }
        return Ok(kernels);
    }
    for (range, d) in cfg.group_ranges(channels) {
        if d.dx.abs() > 1 || d.dy.abs() > 1 {
            return Err(Error::config(format!(
                "displacement ({},{}) is outside the 3×3 kernel support",
                d.dx, d.dy
            )));
        }
        let row = (1 - d.dy) as usize;
        let col = (1 - d.dx) as usize;
        for i in range {
            data[i * 9 + row * 3 + col] = T::one();
        }
    }
    Ok(kernels)
}

/// Largest |shift − conv| over interior positions (every 3×3 neighbour
/// inside the map) and over the remaining boundary ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceDiff {
    pub interior: f64,
    pub boundary: f64,
    pub interior_positions: usize,
}

/// Runs the spatial shift and the fixed-kernel depthwise convolution on the
/// same `[w, h, c]` tensor and compares them.
pub fn compare_shift_conv<T: Scalar>(t: &Tensor<T>, cfg: &ShiftConfig) -> Result<EquivalenceDiff> {
    let [w, h, c] = *t.shape() else {
        return Err(Error::shape(format!(
            "expected [w, h, c], got {:?}",
            t.shape()
        )));
    };
    let kernels = build_shift_kernels::<T>(cfg, c)?;
    let conv = depthwise_conv3x3_forward(t, &kernels)?;
    let shift = crate::ops::spatial_shift_forward(t, cfg)?;
    let mut diff = EquivalenceDiff {
        interior: 0.0,
        boundary: 0.0,
        interior_positions: 0,
    };
    for x in 0..w {
        for y in 0..h {
            let interior = x >= 1 && x + 1 < w && y >= 1 && y + 1 < h;
            diff.interior_positions += usize::from(interior);
            let at = (x * h + y) * c;
            let worst = (at..at + c)
                .map(|i| (conv.data()[i] - shift.data()[i]).abs().as_f64())
                .fold(0.0, f64::max);
            let slot = if interior {
                &mut diff.interior
            } else {
                &mut diff.boundary
            };
            *slot = slot.max(worst);
        }
    }
    Ok(diff)
}
