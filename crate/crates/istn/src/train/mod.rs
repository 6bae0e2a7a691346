//! Adversarial training: soft labels, the generator/discriminator losses,
//! and the unidirectional and bidirectional (cycle-consistent) loops.

mod config;
mod fit;
mod label;
mod losses;
mod record;
mod step;

pub use config::{Direction, TrainConfig};
pub use fit::{ckpt_path, fit, fit_into, FitData, FitOutcome, Trainer};
pub use label::{soft_label, LabelKind, SoftLabelPolicy};
pub use losses::{discriminator_loss, istn_loss_bi, istn_loss_uni, LossBundle};
pub use record::{EpochRecord, ExperimentRecord, RunStatus};
pub use step::{gather_rows, AdversarialUnit, BiTrainer, TaskTarget, TaskTrainer, UniTrainer};
