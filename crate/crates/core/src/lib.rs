//! Spatial-shift MLP (S²-MLP) vision backbone, built from scratch.
//!
//! The crate covers the whole pipeline on a small dense [`Tensor`] type:
//!
//! - [`shift`]: spatial-shift configurations (the four-direction default and
//!   the ablation presets) and a textual grammar for custom ones.
//! - [`ops`]: forward/backward pairs for every layer primitive, including the
//!   spatial shift itself and a depthwise 3×3 convolution used as an
//!   equivalence oracle for it.
//! - [`model`]: patch embedding, S²-MLP blocks (and an MLP-Mixer baseline
//!   block), pooling and the classifier head.
//! - [`analysis`]: closed-form and instrumented parameter / FLOPs accounting.
//! - [`gradcheck`]: central finite-difference harness for every backward pass.
//! - [`train`]: AdamW, warmup + cosine schedule and a synthetic
//!   relative-arrangement task that needs cross-patch communication.
//! - [`serialize`]: checksummed binary weight files and `key = value` configs.
//! - [`cli`]: the command surface behind the `s2mlp` binary.
//!
//! Runnable walkthroughs for each capability live in the crate's `examples/`
//! directory.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod flops;
pub mod gradcheck;
pub mod model;
pub mod ops;
pub mod parallel;
pub mod rng;
pub mod serialize;
pub mod shift;
pub mod tensor;
pub mod train;

pub use error::{Error, Result, WeightFileError};
pub use model::{BlockKind, Model, ModelConfig, ParamStore, PresetName};
pub use ops::NormKind;
pub use shift::{Displacement, ShiftConfig};
pub use tensor::{DType, Scalar, Tensor};
