//! Adversarially trained image-and-spatial transformer networks (ISTNs) for
//! explainable image-level domain adaptation.
//!
//! An ISTN composes an image transformer network (ITN, appearance changes)
//! with a spatial transformer network (STN, affine or B-spline free-form
//! deformation). The composite is trained as the generator of an adversarial
//! game against a per-domain discriminator, so that source-domain images are
//! mapped into the target domain while target images pass through unchanged.
//! Downstream task models are then retrained on the transferred images and
//! evaluated on the untouched target domain to measure how much predictive
//! performance the adaptation recovers.
//!
//! The crate is organized along the pipeline:
//!
//! - [`spatial`]: differentiable geometry — affine grids, cubic B-spline
//!   control-point fields, dense displacement fields, multilinear resampling.
//! - [`nn`]: declarative layer tables and the layer-wise forward/backward
//!   executor (conv, upsample-conv, norms, dropout, pooling, linear) plus Adam
//!   and checkpointing.
//! - [`models`]: the concrete 2D/3D architectures (ITN, STN regressors,
//!   discriminator, task models) and the ISTN composition.
//! - [`synth`]: the four synthetic digit domains (thin/thick × unslanted/
//!   slanted) with healthy/fractured/swollen perturbation classes.
//! - [`train`]: soft labels, the adversarial losses, the unidirectional and
//!   bidirectional (cycle-consistent) training loops.
//! - [`eval`]: baseline training, retraining/finetuning on transferred
//!   images, and recovery reports.
//! - [`experiment`]: config-driven orchestration, grid search, figures.
//!
//! All numeric kernels are generic over [`Scalar`] (`f32` or `f64`); training
//! uses `f32`, while `f64` instantiations back the high-precision oracle
//! tests.

pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod models;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod spatial;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod viz;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Training-precision tensor.
pub type Tensor32 = Tensor<f32>;
/// Double-precision tensor, used by oracle-grade numeric checks.
pub type Tensor64 = Tensor<f64>;
