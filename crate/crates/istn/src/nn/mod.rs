//! Declarative layer tables and the layer-wise forward/backward executor.

mod adam;
mod block;
mod checkpoint;
mod loss;
mod network;
mod spec;

pub use adam::{Adam, AdamState};
pub use block::{FwdCtx, Linear};
pub use checkpoint::{Checkpoint, Manifest, ManifestEntry};
pub use loss::{bce, bce_batch, bce_dp, l1_mean, mse, softmax_ce, BCE_EPS};
pub use network::Network;
pub use spec::{conv_out, Activation, LayerKind, LayerSpec, NetworkSpec, Norm};
