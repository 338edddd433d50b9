use crate::error::{Error, Result};
use crate::flops::{self, Kind};
use crate::tensor::{Scalar, Tensor};

/// Column means over the patch axis: `[M, c] -> [c]`, or batched
/// `[B, M, c] -> [B, c]`.
pub fn global_avg_pool<T: Scalar>(t: &Tensor<T>) -> Result<Tensor<T>> {
    let axis = match t.rank() {
        2 => 0,
        3 => 1,
        _ => {
            return Err(Error::shape(format!(
                "global_avg_pool expects [M, c] or [B, M, c], got {:?}",
                t.shape()
            )))
        }
    };
    // one 1/M scaling per pooled output
    flops::record(Kind::Elementwise, (t.numel() / t.shape()[axis]) as u64);
    t.mean_axis(axis)
}

/// Gradient of [`global_avg_pool`] for an input of `input_shape`.
pub fn global_avg_pool_backward<T: Scalar>(
    input_shape: &[usize],
    dy: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (batch, m, c) = match *input_shape {
        [m, c] => (1, m, c),
        [b, m, c] => (b, m, c),
        _ => {
            return Err(Error::shape(format!(
                "bad pool input shape {input_shape:?}"
            )))
        }
    };
    if dy.numel() != batch * c {
        return Err(Error::shape(format!(
            "global_avg_pool backward: gradient {:?} does not match input {input_shape:?}",
            dy.shape()
        )));
    }
    let inv_m = T::one() / T::from_f64(m as f64);
    let g = dy.data();
    Tensor::from_fn(input_shape, |i| {
        let b = i / (m * c);
        g[b * c + i % c] * inv_m
    })
}
