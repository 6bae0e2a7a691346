//! The adversarial fit loop: epochs of (discriminator, ISTN, task) steps over
//! shuffled source/target batches, with loss curves, a divergence guard, and
//! periodic checkpoints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::models::TaskKind;
use crate::rng::{shuffled_indices, SeedStream};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::config::{Direction, TrainConfig};
use super::losses::LossBundle;
use super::record::{ExperimentRecord, RunStatus};
use super::step::{gather_rows, BiTrainer, TaskTarget, UniTrainer, STREAM_SHUFFLE};

/// Training inputs. Target images carry no labels by construction: the
/// adaptation path never sees them.
pub struct FitData<'a> {
    pub source_images: &'a Tensor<f32>,
    pub source_classes: Option<&'a [u8]>,
    pub source_values: Option<&'a [f64]>,
    pub target_images: &'a Tensor<f32>,
}

impl<'a> FitData<'a> {
    pub fn classification(
        source_images: &'a Tensor<f32>,
        source_classes: &'a [u8],
        target_images: &'a Tensor<f32>,
    ) -> Self {
        Self {
            source_images,
            source_classes: Some(source_classes),
            source_values: None,
            target_images,
        }
    }

    fn gather_target(&self, idx: &[usize]) -> (Option<Vec<u8>>, Option<Vec<f64>>) {
        let classes = self
            .source_classes
            .map(|c| idx.iter().map(|&i| c[i]).collect());
        let values = self
            .source_values
            .map(|v| idx.iter().map(|&i| v[i]).collect());
        (classes, values)
    }
}

/// Trainer for either direction.
pub enum Trainer<T: Scalar> {
    Uni(UniTrainer<T>),
    Bi(BiTrainer<T>),
}

impl<T: Scalar> Trainer<T> {
    pub fn build(cfg: &TrainConfig, dim: usize, slim: bool, task: Option<TaskKind>) -> Result<Self> {
        Ok(match cfg.direction {
            Direction::Uni => Trainer::Uni(UniTrainer::build(cfg, dim, slim, task)?),
            Direction::Bi => Trainer::Bi(BiTrainer::build(cfg, dim, slim, task)?),
        })
    }

    fn step(
        &mut self,
        batch_s: &Tensor<T>,
        batch_t: &Tensor<T>,
        target: Option<&TaskTarget>,
    ) -> Result<(LossBundle, Option<f64>)> {
        match self {
            Trainer::Uni(t) => t.step(batch_s, batch_t, target),
            Trainer::Bi(t) => t.step(batch_s, batch_t, target),
        }
    }

    pub fn save_checkpoint(&mut self, base: &Path, epoch: usize) -> Result<()> {
        match self {
            Trainer::Uni(t) => t.save_checkpoint(base, epoch),
            Trainer::Bi(t) => t.save_checkpoint(base, epoch),
        }
    }

    pub fn load_checkpoint(&mut self, base: &Path) -> Result<usize> {
        match self {
            Trainer::Uni(t) => t.load_checkpoint(base),
            Trainer::Bi(t) => t.load_checkpoint(base),
        }
    }

    /// The forward-direction generator.
    pub fn istn_mut(&mut self) -> &mut crate::models::IstnModel<T> {
        match self {
            Trainer::Uni(t) => &mut t.unit.istn,
            Trainer::Bi(t) => &mut t.fwd,
        }
    }

    pub fn task_mut(&mut self) -> Option<&mut super::step::TaskTrainer<T>> {
        match self {
            Trainer::Uni(t) => t.task.as_mut(),
            Trainer::Bi(t) => t.task.as_mut(),
        }
    }
}

pub struct FitOutcome<T: Scalar> {
    pub record: ExperimentRecord,
    pub trainer: Trainer<T>,
}

/// Runs `cfg.epochs` of adversarial training (with concurrent task
/// retraining when `task` is given). `checkpoint_dir`, when set, receives
/// `ckpt_epoch_<k>` checkpoints every `cfg.checkpoint_every` epochs plus a
/// final `ckpt_final`.
pub fn fit(
    cfg: &TrainConfig,
    dim: usize,
    slim: bool,
    task: Option<TaskKind>,
    data: &FitData,
    checkpoint_dir: Option<&Path>,
) -> Result<FitOutcome<f32>> {
    cfg.validate()?;
    let mut trainer = Trainer::build(cfg, dim, slim, task)?;
    let record = fit_into(cfg, &mut trainer, data, checkpoint_dir, 0)?;
    Ok(FitOutcome { record, trainer })
}

/// The epoch loop over an existing trainer, starting at `start_epoch`
/// (non-zero when resuming from a checkpoint).
pub fn fit_into(
    cfg: &TrainConfig,
    trainer: &mut Trainer<f32>,
    data: &FitData,
    checkpoint_dir: Option<&Path>,
    start_epoch: usize,
) -> Result<ExperimentRecord> {
    let t_start = Instant::now();
    let mut record = ExperimentRecord::new(cfg.clone());
    let ns = data.source_images.shape()[0];
    let nt = data.target_images.shape()[0];
    let steps_per_epoch = ns.min(nt) / cfg.batch_size;
    if cfg.epochs > 0 && steps_per_epoch == 0 {
        return Err(Error::Size(format!(
            "batch size {} exceeds dataset sizes ({ns} source / {nt} target)",
            cfg.batch_size
        )));
    }
    let seeds = SeedStream::new(cfg.seed);
    'epochs: for epoch in start_epoch..cfg.epochs {
        let e_start = Instant::now();
        let mut order_rng = seeds.item_rng(STREAM_SHUFFLE, epoch as u64);
        let perm_s = shuffled_indices(ns, &mut order_rng);
        let perm_t = shuffled_indices(nt, &mut order_rng);
        let mut sums = LossBundle {
            l_dis: 0.0,
            l_adv: 0.0,
            l_idt: 0.0,
            l_cyc: None,
            lambda: cfg.lambda,
        };
        let mut cyc_sum = 0.0;
        let mut task_sum = 0.0;
        let mut task_steps = 0usize;
        for step in 0..steps_per_epoch {
            let idx_s = &perm_s[step * cfg.batch_size..(step + 1) * cfg.batch_size];
            let idx_t = &perm_t[step * cfg.batch_size..(step + 1) * cfg.batch_size];
            let batch_s = gather_rows(data.source_images, idx_s);
            let batch_t = gather_rows(data.target_images, idx_t);
            let (classes, values) = data.gather_target(idx_s);
            let target = match (&classes, &values) {
                (Some(c), _) => Some(TaskTarget::Classes(c)),
                (None, Some(v)) => Some(TaskTarget::Values(v)),
                _ => None,
            };
            let (bundle, l_task) = trainer.step(&batch_s, &batch_t, target.as_ref())?;
            if bundle.total_istn() > cfg.divergence_threshold
                || bundle.l_dis > cfg.divergence_threshold
            {
                record.status = RunStatus::Failed {
                    stage: format!("diverged at epoch {epoch} step {step}: {bundle:?}"),
                };
                record.push_epoch(epoch, bundle, l_task, e_start.elapsed().as_secs_f64());
                break 'epochs;
            }
            sums.l_dis += bundle.l_dis;
            sums.l_adv += bundle.l_adv;
            sums.l_idt += bundle.l_idt;
            if let Some(c) = bundle.l_cyc {
                cyc_sum += c;
            }
            if let Some(lt) = l_task {
                task_sum += lt;
                task_steps += 1;
            }
        }
        let k = steps_per_epoch as f64;
        let mean = LossBundle {
            l_dis: sums.l_dis / k,
            l_adv: sums.l_adv / k,
            l_idt: sums.l_idt / k,
            l_cyc: match cfg.direction {
                Direction::Bi => Some(cyc_sum / k),
                Direction::Uni => None,
            },
            lambda: cfg.lambda,
        };
        let l_task = (task_steps > 0).then(|| task_sum / task_steps as f64);
        record.push_epoch(epoch, mean, l_task, e_start.elapsed().as_secs_f64());
        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
                trainer.save_checkpoint(&ckpt_path(dir, epoch), epoch + 1)?;
            }
        }
    }
    if let Some(dir) = checkpoint_dir {
        trainer.save_checkpoint(&dir.join("ckpt_final"), cfg.epochs)?;
    }
    record.wall_s = t_start.elapsed().as_secs_f64();
    Ok(record)
}

pub fn ckpt_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("ckpt_epoch_{epoch}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::StnChoice;

    fn tiny_data() -> (Tensor<f32>, Vec<u8>, Tensor<f32>) {
        // deterministic toy tensors, just to drive the loop machinery
        let mut s = Tensor::<f32>::zeros(&[8, 1, 28, 28]);
        let mut t = Tensor::<f32>::zeros(&[8, 1, 28, 28]);
        for (i, v) in s.data_mut().iter_mut().enumerate() {
            *v = ((i % 97) as f32 / 97.0) * 2.0 - 1.0;
        }
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            *v = ((i % 89) as f32 / 89.0) * 2.0 - 1.0;
        }
        let labels = vec![0u8, 1, 2, 0, 1, 2, 0, 1];
        (s, labels, t)
    }

    #[test]
    fn zero_epochs_is_a_no_op_with_empty_curves() {
        let (s, labels, t) = tiny_data();
        let cfg = TrainConfig {
            epochs: 0,
            batch_size: 4,
            stn: StnChoice::Affine,
            use_itn: false,
            ..TrainConfig::default()
        };
        let data = FitData::classification(&s, &labels, &t);
        let out = fit(&cfg, 2, false, None, &data, None).unwrap();
        assert!(out.record.epochs.is_empty());
        assert!(matches!(out.record.status, RunStatus::Completed));
    }

    #[test]
    fn oversized_batch_is_size_error() {
        let (s, labels, t) = tiny_data();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 64,
            stn: StnChoice::Affine,
            use_itn: false,
            ..TrainConfig::default()
        };
        let data = FitData::classification(&s, &labels, &t);
        assert!(matches!(
            fit(&cfg, 2, false, None, &data, None),
            Err(Error::Size(_))
        ));
    }
}
