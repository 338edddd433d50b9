//! Layer primitives as forward/backward pairs.
//!
//! Every forward returns its output together with a cache holding what the
//! matching backward needs; backward consumes that cache and the output
//! gradient. Gradients are exact analytic derivatives, validated against
//! finite differences by [`crate::gradcheck`].

mod conv;
mod gelu;
mod linear;
mod loss;
mod norm;
mod pool;
mod spatial_shift;

pub use conv::{
    build_shift_kernels, compare_shift_conv, depthwise_conv3x3_backward, depthwise_conv3x3_forward,
    EquivalenceDiff,
};
pub use gelu::{gelu, gelu_backward, gelu_forward, gelu_grad, GeluCache};
pub use linear::{Linear, LinearCache, LinearGrads};
pub use loss::softmax_xent;
pub use norm::{Norm, NormCache, NormGrads, NormKind, LAYERNORM_EPS};
pub use pool::{global_avg_pool, global_avg_pool_backward};
pub use spatial_shift::{spatial_shift_backward, spatial_shift_forward};

/// Names of every op pair; [`crate::gradcheck`] must cover all of them.
pub const REGISTERED_OPS: [&str; 8] = [
    "linear",
    "layernorm",
    "affine",
    "gelu",
    "spatial_shift",
    "depthwise_conv3x3",
    "global_avg_pool",
    "softmax_xent",
];
