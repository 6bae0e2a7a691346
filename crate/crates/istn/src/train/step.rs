//! Adversarial step machinery: the unidirectional trainer (ISTN + one
//! discriminator) and the bidirectional trainer (two ISTNs + two
//! discriminators with cycle consistency).
//!
//! Every stochastic consumer (each network's dropout, each label sampler,
//! the task model) owns its own seeded ChaCha stream, so adding components
//! (for example the reverse direction) never perturbs the draws of the
//! others; this is what makes the bi -> uni reduction exact and runs
//! bit-reproducible.

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::{pack_istn, pack_network, unpack_istn, unpack_network, IstnModel, TaskKind};
use crate::nn::{bce_batch, mse, softmax_ce, Adam, AdamState, Checkpoint, Network};
use crate::rng::{RngState, SeedStream};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::config::TrainConfig;
use super::label::{LabelKind, SoftLabelPolicy};
use super::losses::LossBundle;

// RNG stream ids, one per stochastic consumer.
const STREAM_INIT_FWD: u64 = 10;
const STREAM_INIT_REV: u64 = 11;
const STREAM_INIT_DIS_T: u64 = 12;
const STREAM_INIT_DIS_S: u64 = 13;
const STREAM_INIT_TASK: u64 = 14;
const STREAM_FWD: u64 = 20;
const STREAM_REV: u64 = 21;
const STREAM_DIS_T: u64 = 22;
const STREAM_DIS_S: u64 = 23;
const STREAM_LABELS_T: u64 = 24;
const STREAM_LABELS_S: u64 = 25;
const STREAM_TASK: u64 = 26;
pub(crate) const STREAM_SHUFFLE: u64 = 27;

/// Labels for a task batch: class indices or regression targets.
pub enum TaskTarget<'a> {
    Classes(&'a [u8]),
    Values(&'a [f64]),
}

/// A task model with its optimizer and loss rule.
pub struct TaskTrainer<T> {
    pub kind: TaskKind,
    pub net: Network<T>,
    pub opt: Adam<T>,
    pub rng: ChaCha8Rng,
}

impl<T: Scalar> TaskTrainer<T> {
    pub fn build(kind: TaskKind, lr: f64, betas: (f64, f64), seeds: &SeedStream) -> Result<Self> {
        let net = crate::models::build_task_model(kind, &mut seeds.rng(STREAM_INIT_TASK))?;
        Ok(Self {
            kind,
            net,
            opt: Adam::new(lr, betas.0, betas.1),
            rng: seeds.rng(STREAM_TASK),
        })
    }

    pub fn from_network(kind: TaskKind, net: Network<T>, lr: f64, betas: (f64, f64), rng: ChaCha8Rng) -> Self {
        Self {
            kind,
            net,
            opt: Adam::new(lr, betas.0, betas.1),
            rng,
        }
    }

    /// Loss and gradient (w.r.t. the raw network output) for a batch.
    fn loss_grad(&self, out: &Tensor<T>, target: &TaskTarget) -> Result<(f64, Tensor<T>)> {
        let n = out.shape()[0];
        let per = out.numel() / n;
        match (self.kind, target) {
            (TaskKind::Digit3Class, TaskTarget::Classes(labels)) => {
                if per != 3 {
                    return Err(Error::Shape(format!("expected 3 logits, got {per}")));
                }
                let logits = out.clone().reshaped(&[n, 3])?;
                let labels: Vec<usize> = labels.iter().map(|&c| c as usize).collect();
                let (loss, grad) = softmax_ce(&logits, &labels);
                Ok((loss, grad.reshaped(out.shape())?))
            }
            (TaskKind::Sex | TaskKind::Blob, TaskTarget::Classes(labels)) => {
                if per != 1 {
                    return Err(Error::Shape(format!("expected scalar output, got {per}")));
                }
                let targets: Vec<f64> = labels.iter().map(|&c| c as f64).collect();
                let (loss, grad) = bce_batch(out.data(), &targets);
                Ok((loss, Tensor::from_vec(out.shape(), grad)?))
            }
            (TaskKind::Age, TaskTarget::Values(vals)) => {
                if per != 1 {
                    return Err(Error::Shape(format!("expected scalar output, got {per}")));
                }
                let (loss, grad) = mse(out.data(), vals);
                Ok((loss, Tensor::from_vec(out.shape(), grad)?))
            }
            _ => Err(Error::Contract(format!(
                "task {:?} received an incompatible target kind",
                self.kind
            ))),
        }
    }

    /// Loss of an already-computed output against a target (no update).
    pub fn eval_loss(&self, out: &Tensor<T>, target: &TaskTarget) -> Result<f64> {
        Ok(self.loss_grad(out, target)?.0)
    }

    /// One optimizer step on a (detached) image batch; returns the loss.
    pub fn train_step(&mut self, imgs: &Tensor<T>, target: &TaskTarget) -> Result<f64> {
        let out = self.net.forward(imgs, true, &mut self.rng);
        let (loss, grad) = self.loss_grad(&out, target)?;
        self.net.zero_grad();
        self.net.backward(&grad);
        self.opt.step(|f| {
            self.net.visit_params(&mut |_, p, g| f(p, g));
        });
        Ok(loss)
    }

    /// Eval-mode forward.
    pub fn predict(&mut self, imgs: &Tensor<T>) -> Tensor<T> {
        self.net.forward(imgs, false, &mut self.rng)
    }
}

fn flat_probs<T: Scalar>(out: &Tensor<T>) -> Vec<T> {
    out.data().to_vec()
}

/// Concatenates two batched tensors along the batch axis.
fn concat_batch<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(a.shape()[1..], b.shape()[1..]);
    let mut shape = a.shape().to_vec();
    shape[0] += b.shape()[0];
    let mut data = Vec::with_capacity(a.numel() + b.numel());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&shape, data).expect("concat shape")
}

fn grad_tensor<T: Scalar>(shape: &[usize], grad: Vec<T>) -> Tensor<T> {
    Tensor::from_vec(shape, grad).expect("gradient shape")
}

/// Shared per-trainer guts for one adversarial direction.
pub struct AdversarialUnit<T> {
    pub istn: IstnModel<T>,
    pub dis: Network<T>,
    pub opt_istn: Adam<T>,
    pub opt_dis: Adam<T>,
    pub istn_rng: ChaCha8Rng,
    pub dis_rng: ChaCha8Rng,
    pub label_rng: ChaCha8Rng,
}

impl<T: Scalar> AdversarialUnit<T> {
    /// Discriminator update on a detached fake batch and a real batch;
    /// returns the total discriminator loss
    /// `0.5 [BCE(D(fake), y_fake) + BCE(D(real), y_real)]`. The two batches
    /// share one forward (instance norm keeps samples independent).
    fn dis_step(&mut self, fake: &Tensor<T>, real: &Tensor<T>, policy: &SoftLabelPolicy) -> f64 {
        let n_f = fake.shape()[0];
        let y_fake = policy.sample_n(LabelKind::Fake, n_f, &mut self.label_rng);
        let y_real = policy.sample_n(LabelKind::Real, real.shape()[0], &mut self.label_rng);
        self.dis.zero_grad();
        let both = concat_batch(fake, real);
        let d = self.dis.forward(&both, true, &mut self.dis_rng);
        let probs = flat_probs(&d);
        let (l_f, mut g_f) = bce_batch(&probs[..n_f], &y_fake);
        let (l_r, g_r) = bce_batch(&probs[n_f..], &y_real);
        g_f.extend_from_slice(&g_r);
        g_f.iter_mut().for_each(|v| *v *= T::c(0.5));
        self.dis.backward(&grad_tensor(d.shape(), g_f));
        let opt = &mut self.opt_dis;
        let dis = &mut self.dis;
        opt.step(|f| dis.visit_params(&mut |_, p, g| f(p, g)));
        0.5 * (l_f + l_r)
    }

    /// Adversarial gradient for the generator: pushes `dis(fake)` toward the
    /// real label with the *current* discriminator; returns `(l_adv,
    /// d loss/d fake)` without stepping the discriminator.
    fn generator_adv_grad(&mut self, fake: &Tensor<T>, policy: &SoftLabelPolicy) -> (f64, Tensor<T>) {
        let n = fake.shape()[0];
        let y_real = policy.sample_n(LabelKind::Real, n, &mut self.label_rng);
        let d_gen = self.dis.forward(fake, true, &mut self.dis_rng);
        let (l_adv, g) = bce_batch(&flat_probs(&d_gen), &y_real);
        let g_fake = self.dis.backward_input_only(&grad_tensor(d_gen.shape(), g));
        (l_adv, g_fake)
    }
}

/// Unidirectional trainer: Fig.-1-middle training scheme.
pub struct UniTrainer<T> {
    pub cfg: TrainConfig,
    pub dim: usize,
    pub slim: bool,
    pub unit: AdversarialUnit<T>,
    pub task: Option<TaskTrainer<T>>,
    pub step_idx: u64,
}

impl<T: Scalar> UniTrainer<T> {
    pub fn build(cfg: &TrainConfig, dim: usize, slim: bool, task: Option<TaskKind>) -> Result<Self> {
        cfg.validate()?;
        let seeds = SeedStream::new(cfg.seed);
        let istn = IstnModel::build(
            cfg.use_itn,
            cfg.stn,
            dim,
            cfg.cp_spacing,
            slim,
            &mut seeds.rng(STREAM_INIT_FWD),
        )?;
        let dis_spec = match (dim, slim) {
            (2, _) => crate::models::tables::discriminator_2d_spec(),
            (3, false) => crate::models::tables::discriminator_3d_spec(),
            (3, true) => crate::models::tables::discriminator_3d_slim_spec(),
            _ => return Err(Error::Config(format!("unsupported dim {dim}"))),
        };
        let dis = Network::build(dis_spec, &mut seeds.rng(STREAM_INIT_DIS_T))?;
        let task = match task {
            None => None,
            Some(kind) => Some(TaskTrainer::build(kind, cfg.lr_task, cfg.adam_betas, &seeds)?),
        };
        Ok(Self {
            cfg: cfg.clone(),
            dim,
            slim,
            unit: AdversarialUnit {
                istn,
                dis,
                opt_istn: Adam::new(cfg.lr_istn, cfg.adam_betas.0, cfg.adam_betas.1),
                opt_dis: Adam::new(cfg.lr_dis, cfg.adam_betas.0, cfg.adam_betas.1),
                istn_rng: seeds.rng(STREAM_FWD),
                dis_rng: seeds.rng(STREAM_DIS_T),
                label_rng: seeds.rng(STREAM_LABELS_T),
            },
            task,
            step_idx: 0,
        })
    }

    /// One adversarial step: discriminator first (on the detached transfer),
    /// then the ISTN (adversarial + identity), then the task model on the
    /// detached transfer with source labels.
    pub fn step(
        &mut self,
        batch_s: &Tensor<T>,
        batch_t: &Tensor<T>,
        source_target: Option<&TaskTarget>,
    ) -> Result<(LossBundle, Option<f64>)> {
        let u = &mut self.unit;
        let s2t = u.istn.forward(batch_s, true, &mut u.istn_rng)?;
        let l_dis = u.dis_step(&s2t, batch_t, &self.cfg.soft_labels);

        // Generator update: adversarial part uses the ISTN cache from the
        // batch_s forward above.
        u.istn.zero_grad();
        let (l_adv, g_s2t) = u.generator_adv_grad(&s2t, &self.cfg.soft_labels);
        u.istn.backward(&g_s2t)?;
        let t2t = u.istn.forward(batch_t, true, &mut u.istn_rng)?;
        let (l_idt, mut g_idt) = crate::nn::l1_mean(&t2t, batch_t);
        g_idt.scale(T::c(0.5 * self.cfg.lambda));
        u.istn.backward(&g_idt)?;
        let opt = &mut u.opt_istn;
        let istn = &mut u.istn;
        opt.step(|f| istn.visit_params(&mut |_, p, g| f(p, g)));

        let l_task = match (&mut self.task, source_target) {
            (Some(task), Some(target)) => Some(task.train_step(&s2t, target)?),
            _ => None,
        };

        let bundle = LossBundle {
            l_dis,
            l_adv,
            l_idt,
            l_cyc: None,
            lambda: self.cfg.lambda,
        };
        if !bundle.all_finite() {
            return Err(Error::Training(format!(
                "non-finite loss at step {}: {bundle:?}",
                self.step_idx
            )));
        }
        self.step_idx += 1;
        Ok((bundle, l_task))
    }

    /// Full training state (params, optimizer moments, RNG positions) for
    /// bit-identical resume.
    pub fn save_checkpoint(&mut self, base: &Path, epoch: usize) -> Result<()> {
        let mut ck = Checkpoint::new();
        pack_istn(&mut ck, "istn", &mut self.unit.istn);
        pack_network(&mut ck, "dis", &mut self.unit.dis);
        if let Some(task) = &mut self.task {
            pack_network(&mut ck, "task", &mut task.net);
        }
        ck.attach("epoch", &epoch)?;
        ck.attach("step_idx", &self.step_idx)?;
        ck.attach("train_config", &self.cfg)?;
        ck.attach("dim", &self.dim)?;
        ck.attach("slim", &self.slim)?;
        ck.attach("opt_istn", &self.unit.opt_istn.state())?;
        ck.attach("opt_dis", &self.unit.opt_dis.state())?;
        ck.attach("rng_istn", &RngState::capture(&self.unit.istn_rng))?;
        ck.attach("rng_dis", &RngState::capture(&self.unit.dis_rng))?;
        ck.attach("rng_label", &RngState::capture(&self.unit.label_rng))?;
        if let Some(task) = &self.task {
            ck.attach("opt_task", &task.opt.state())?;
            ck.attach("rng_task", &RngState::capture(&task.rng))?;
        }
        ck.save(base)
    }

    /// Restores a checkpoint produced by [`Self::save_checkpoint`] into this
    /// trainer (which must have the same architecture); returns the stored
    /// epoch index.
    pub fn load_checkpoint(&mut self, base: &Path) -> Result<usize> {
        let ck = Checkpoint::<T>::load(base)?;
        unpack_istn(&ck, "istn", &mut self.unit.istn)?;
        unpack_network(&ck, "dis", &mut self.unit.dis)?;
        let epoch: usize = ck.extra("epoch")?;
        self.step_idx = ck.extra("step_idx")?;
        let st: AdamState = ck.extra("opt_istn")?;
        self.unit.opt_istn.restore(&st);
        let st: AdamState = ck.extra("opt_dis")?;
        self.unit.opt_dis.restore(&st);
        let rs: RngState = ck.extra("rng_istn")?;
        self.unit.istn_rng = rs.restore();
        let rs: RngState = ck.extra("rng_dis")?;
        self.unit.dis_rng = rs.restore();
        let rs: RngState = ck.extra("rng_label")?;
        self.unit.label_rng = rs.restore();
        if let Some(task) = &mut self.task {
            unpack_network(&ck, "task", &mut task.net)?;
            let st: AdamState = ck.extra("opt_task")?;
            task.opt.restore(&st);
            let rs: RngState = ck.extra("rng_task")?;
            task.rng = rs.restore();
        }
        Ok(epoch)
    }
}

/// Bidirectional (cycle-consistent) trainer with two ISTNs and two
/// discriminators; both generators share one optimizer.
pub struct BiTrainer<T> {
    pub cfg: TrainConfig,
    pub dim: usize,
    pub slim: bool,
    pub fwd: IstnModel<T>,
    pub rev: IstnModel<T>,
    pub dis_t: Network<T>,
    pub dis_s: Network<T>,
    pub task: Option<TaskTrainer<T>>,
    pub opt_g: Adam<T>,
    pub opt_dis_t: Adam<T>,
    pub opt_dis_s: Adam<T>,
    fwd_rng: ChaCha8Rng,
    rev_rng: ChaCha8Rng,
    dis_t_rng: ChaCha8Rng,
    dis_s_rng: ChaCha8Rng,
    label_t_rng: ChaCha8Rng,
    label_s_rng: ChaCha8Rng,
    pub step_idx: u64,
}

impl<T: Scalar> BiTrainer<T> {
    pub fn build(cfg: &TrainConfig, dim: usize, slim: bool, task: Option<TaskKind>) -> Result<Self> {
        cfg.validate()?;
        let seeds = SeedStream::new(cfg.seed);
        let fwd = IstnModel::build(
            cfg.use_itn,
            cfg.stn,
            dim,
            cfg.cp_spacing,
            slim,
            &mut seeds.rng(STREAM_INIT_FWD),
        )?;
        let rev = IstnModel::build(
            cfg.use_itn,
            cfg.stn,
            dim,
            cfg.cp_spacing,
            slim,
            &mut seeds.rng(STREAM_INIT_REV),
        )?;
        let dis_spec = match (dim, slim) {
            (2, _) => crate::models::tables::discriminator_2d_spec(),
            (3, false) => crate::models::tables::discriminator_3d_spec(),
            (3, true) => crate::models::tables::discriminator_3d_slim_spec(),
            _ => return Err(Error::Config(format!("unsupported dim {dim}"))),
        };
        let dis_t = Network::build(dis_spec.clone(), &mut seeds.rng(STREAM_INIT_DIS_T))?;
        let dis_s = Network::build(dis_spec, &mut seeds.rng(STREAM_INIT_DIS_S))?;
        let task = match task {
            None => None,
            Some(kind) => Some(TaskTrainer::build(kind, cfg.lr_task, cfg.adam_betas, &seeds)?),
        };
        Ok(Self {
            cfg: cfg.clone(),
            dim,
            slim,
            fwd,
            rev,
            dis_t,
            dis_s,
            task,
            opt_g: Adam::new(cfg.lr_istn, cfg.adam_betas.0, cfg.adam_betas.1),
            opt_dis_t: Adam::new(cfg.lr_dis, cfg.adam_betas.0, cfg.adam_betas.1),
            opt_dis_s: Adam::new(cfg.lr_dis, cfg.adam_betas.0, cfg.adam_betas.1),
            fwd_rng: seeds.rng(STREAM_FWD),
            rev_rng: seeds.rng(STREAM_REV),
            dis_t_rng: seeds.rng(STREAM_DIS_T),
            dis_s_rng: seeds.rng(STREAM_DIS_S),
            label_t_rng: seeds.rng(STREAM_LABELS_T),
            label_s_rng: seeds.rng(STREAM_LABELS_S),
            step_idx: 0,
        })
    }

    /// One bidirectional step; returns the direction-averaged bundle.
    pub fn step(
        &mut self,
        batch_s: &Tensor<T>,
        batch_t: &Tensor<T>,
        source_target: Option<&TaskTarget>,
    ) -> Result<(LossBundle, Option<f64>)> {
        let policy = self.cfg.soft_labels;
        let lambda = self.cfg.lambda;
        let lambda_cyc = self.cfg.cycle_weight();

        // transfers for the discriminator updates (detached)
        let s2t = self.fwd.forward(batch_s, true, &mut self.fwd_rng)?;
        let t2s = self.rev.forward(batch_t, true, &mut self.rev_rng)?;

        // discriminator updates, fake side first then real side
        let l_dis_t = Self::dis_pair_update(
            &mut self.dis_t,
            &mut self.opt_dis_t,
            &mut self.dis_t_rng,
            &mut self.label_t_rng,
            &policy,
            &s2t,
            batch_t,
        );
        let l_dis_s = Self::dis_pair_update(
            &mut self.dis_s,
            &mut self.opt_dis_s,
            &mut self.dis_s_rng,
            &mut self.label_s_rng,
            &policy,
            &t2s,
            batch_s,
        );

        self.fwd.zero_grad();
        self.rev.zero_grad();

        // --- direction S -> T (fwd cache still holds batch_s) ---
        let mut l_cyc_f = 0.0;
        let mut g_s2t_total: Option<Tensor<T>> = None;
        if lambda_cyc > 0.0 {
            let s2t2s = self.rev.forward(&s2t, true, &mut self.rev_rng)?;
            let (l, mut g) = crate::nn::l1_mean(&s2t2s, batch_s);
            l_cyc_f = l;
            g.scale(T::c(lambda_cyc));
            let g_s2t_c = self.rev.backward(&g)?;
            g_s2t_total = Some(g_s2t_c);
        }
        let n = s2t.shape()[0];
        let y_real = policy.sample_n(LabelKind::Real, n, &mut self.label_t_rng);
        let d_gen = self.dis_t.forward(&s2t, true, &mut self.dis_t_rng);
        let (l_adv_f, g_adv) = bce_batch(&flat_probs(&d_gen), &y_real);
        let g_s2t_a = self.dis_t.backward_input_only(&grad_tensor(d_gen.shape(), g_adv));
        let g_s2t = match g_s2t_total {
            Some(mut g) => {
                g.add_scaled(&g_s2t_a, T::one());
                g
            }
            None => g_s2t_a,
        };
        self.fwd.backward(&g_s2t)?;
        let t2t = self.fwd.forward(batch_t, true, &mut self.fwd_rng)?;
        let (l_idt_f, mut g_idt_f) = crate::nn::l1_mean(&t2t, batch_t);
        g_idt_f.scale(T::c(0.5 * lambda));
        self.fwd.backward(&g_idt_f)?;

        // --- direction T -> S ---
        let mut l_cyc_r = 0.0;
        let mut g_t2s_total: Option<Tensor<T>> = None;
        let t2s_fresh = if lambda_cyc > 0.0 {
            // fresh reverse transfer so the reverse cache matches batch_t
            let t2s2 = self.rev.forward(batch_t, true, &mut self.rev_rng)?;
            let t2s2t = self.fwd.forward(&t2s2, true, &mut self.fwd_rng)?;
            let (l, mut g) = crate::nn::l1_mean(&t2s2t, batch_t);
            l_cyc_r = l;
            g.scale(T::c(lambda_cyc));
            let g_t2s_c = self.fwd.backward(&g)?;
            g_t2s_total = Some(g_t2s_c);
            t2s2
        } else {
            self.rev.forward(batch_t, true, &mut self.rev_rng)?
        };
        let y_real_s = policy.sample_n(LabelKind::Real, t2s_fresh.shape()[0], &mut self.label_s_rng);
        let d_gen_s = self.dis_s.forward(&t2s_fresh, true, &mut self.dis_s_rng);
        let (l_adv_r, g_adv_s) = bce_batch(&flat_probs(&d_gen_s), &y_real_s);
        let g_t2s_a = self.dis_s.backward_input_only(&grad_tensor(d_gen_s.shape(), g_adv_s));
        let g_t2s = match g_t2s_total {
            Some(mut g) => {
                g.add_scaled(&g_t2s_a, T::one());
                g
            }
            None => g_t2s_a,
        };
        self.rev.backward(&g_t2s)?;
        let s2s = self.rev.forward(batch_s, true, &mut self.rev_rng)?;
        let (l_idt_r, mut g_idt_r) = crate::nn::l1_mean(&s2s, batch_s);
        g_idt_r.scale(T::c(0.5 * lambda));
        self.rev.backward(&g_idt_r)?;

        // joint generator step
        let opt = &mut self.opt_g;
        let fwd = &mut self.fwd;
        let rev = &mut self.rev;
        opt.step(|f| {
            fwd.visit_params(&mut |_, p, g| f(p, g));
            rev.visit_params(&mut |_, p, g| f(p, g));
        });

        let l_task = match (&mut self.task, source_target) {
            (Some(task), Some(target)) => Some(task.train_step(&s2t, target)?),
            _ => None,
        };

        let bundle = LossBundle {
            l_dis: 0.5 * (l_dis_t + l_dis_s),
            l_adv: 0.5 * (l_adv_f + l_adv_r),
            l_idt: 0.5 * (l_idt_f + l_idt_r),
            l_cyc: Some(0.5 * (l_cyc_f + l_cyc_r)),
            lambda,
        };
        if !bundle.all_finite() {
            return Err(Error::Training(format!(
                "non-finite loss at step {}: {bundle:?}",
                self.step_idx
            )));
        }
        self.step_idx += 1;
        Ok((bundle, l_task))
    }

    fn dis_pair_update(
        dis: &mut Network<T>,
        opt: &mut Adam<T>,
        dis_rng: &mut ChaCha8Rng,
        label_rng: &mut ChaCha8Rng,
        policy: &SoftLabelPolicy,
        fake: &Tensor<T>,
        real: &Tensor<T>,
    ) -> f64 {
        let n_f = fake.shape()[0];
        let y_fake = policy.sample_n(LabelKind::Fake, n_f, label_rng);
        let y_real = policy.sample_n(LabelKind::Real, real.shape()[0], label_rng);
        dis.zero_grad();
        let both = concat_batch(fake, real);
        let d = dis.forward(&both, true, dis_rng);
        let probs = flat_probs(&d);
        let (l_f, mut g_f) = bce_batch(&probs[..n_f], &y_fake);
        let (l_r, g_r) = bce_batch(&probs[n_f..], &y_real);
        g_f.extend_from_slice(&g_r);
        g_f.iter_mut().for_each(|v| *v *= T::c(0.5));
        dis.backward(&grad_tensor(d.shape(), g_f));
        opt.step(|f| dis.visit_params(&mut |_, p, g| f(p, g)));
        0.5 * (l_f + l_r)
    }

    pub fn save_checkpoint(&mut self, base: &Path, epoch: usize) -> Result<()> {
        let mut ck = Checkpoint::new();
        pack_istn(&mut ck, "fwd", &mut self.fwd);
        pack_istn(&mut ck, "rev", &mut self.rev);
        pack_network(&mut ck, "dis_t", &mut self.dis_t);
        pack_network(&mut ck, "dis_s", &mut self.dis_s);
        if let Some(task) = &mut self.task {
            pack_network(&mut ck, "task", &mut task.net);
        }
        ck.attach("epoch", &epoch)?;
        ck.attach("step_idx", &self.step_idx)?;
        ck.attach("train_config", &self.cfg)?;
        ck.attach("dim", &self.dim)?;
        ck.attach("slim", &self.slim)?;
        ck.attach("opt_g", &self.opt_g.state())?;
        ck.attach("opt_dis_t", &self.opt_dis_t.state())?;
        ck.attach("opt_dis_s", &self.opt_dis_s.state())?;
        for (key, rng) in [
            ("rng_fwd", &self.fwd_rng),
            ("rng_rev", &self.rev_rng),
            ("rng_dis_t", &self.dis_t_rng),
            ("rng_dis_s", &self.dis_s_rng),
            ("rng_label_t", &self.label_t_rng),
            ("rng_label_s", &self.label_s_rng),
        ] {
            ck.attach(key, &RngState::capture(rng))?;
        }
        if let Some(task) = &self.task {
            ck.attach("opt_task", &task.opt.state())?;
            ck.attach("rng_task", &RngState::capture(&task.rng))?;
        }
        ck.save(base)
    }

    pub fn load_checkpoint(&mut self, base: &Path) -> Result<usize> {
        let ck = Checkpoint::<T>::load(base)?;
        unpack_istn(&ck, "fwd", &mut self.fwd)?;
        unpack_istn(&ck, "rev", &mut self.rev)?;
        unpack_network(&ck, "dis_t", &mut self.dis_t)?;
        unpack_network(&ck, "dis_s", &mut self.dis_s)?;
        let epoch: usize = ck.extra("epoch")?;
        self.step_idx = ck.extra("step_idx")?;
        let st: AdamState = ck.extra("opt_g")?;
        self.opt_g.restore(&st);
        let st: AdamState = ck.extra("opt_dis_t")?;
        self.opt_dis_t.restore(&st);
        let st: AdamState = ck.extra("opt_dis_s")?;
        self.opt_dis_s.restore(&st);
        let rs: RngState = ck.extra("rng_fwd")?;
        self.fwd_rng = rs.restore();
        let rs: RngState = ck.extra("rng_rev")?;
        self.rev_rng = rs.restore();
        let rs: RngState = ck.extra("rng_dis_t")?;
        self.dis_t_rng = rs.restore();
        let rs: RngState = ck.extra("rng_dis_s")?;
        self.dis_s_rng = rs.restore();
        let rs: RngState = ck.extra("rng_label_t")?;
        self.label_t_rng = rs.restore();
        let rs: RngState = ck.extra("rng_label_s")?;
        self.label_s_rng = rs.restore();
        if let Some(task) = &mut self.task {
            unpack_network(&ck, "task", &mut task.net)?;
            let st: AdamState = ck.extra("opt_task")?;
            task.opt.restore(&st);
            let rs: RngState = ck.extra("rng_task")?;
            task.rng = rs.restore();
        }
        Ok(epoch)
    }
}

/// Gathers rows `idx` from a batched tensor.
pub fn gather_rows<T: Scalar>(t: &Tensor<T>, idx: &[usize]) -> Tensor<T> {
    let per = t.numel() / t.shape()[0];
    let mut data = Vec::with_capacity(idx.len() * per);
    for &i in idx {
        data.extend_from_slice(t.sample(i));
    }
    let mut shape = t.shape().to_vec();
    shape[0] = idx.len();
    Tensor::from_vec(&shape, data).expect("gather shape")
}
