//! Concrete architectures (ITN, STN regressors, discriminator, task models)
//! and the ISTN composition.

mod istn;
mod stn;
pub mod tables;
mod tasks;

pub use istn::{
    load_network, pack_istn, pack_network, save_network, unpack_istn, unpack_network, IstnModel,
    StnChoice,
};
pub use stn::{Stn, StnKind, StnTransform};
pub use tasks::{build_discriminator, build_itn, build_task_model, TaskKind};
