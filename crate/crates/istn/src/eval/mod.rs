//! Task evaluation: source-domain baselines, retraining/finetuning on
//! transferred images, and recovery reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{IstnModel, StnChoice, TaskKind};
use crate::nn::Network;
use crate::rng::{shuffled_indices, SeedStream};

use crate::tensor::Tensor;
use crate::train::{gather_rows, TaskTarget, TaskTrainer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    AccuracyPct,
    MaeYears,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric_kind: MetricKind,
    pub value: f64,
    pub n: usize,
    pub domain_evaluated: String,
    pub model_id: String,
}

impl EvalResult {
    fn validate(&self) -> Result<()> {
        match self.metric_kind {
            MetricKind::AccuracyPct if !(0.0..=100.0).contains(&self.value) => Err(
                Error::Contract(format!("accuracy {} outside [0, 100]", self.value)),
            ),
            MetricKind::MaeYears if self.value < 0.0 => {
                Err(Error::Contract(format!("negative MAE {}", self.value)))
            }
            _ if self.n == 0 => Err(Error::Contract("empty evaluation".into())),
            _ => Ok(()),
        }
    }
}

/// Recovery of a task model after adaptation. `delta_*` follow the
/// improvement convention: accuracy gain, or MAE reduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub baseline_no_da: EvalResult,
    pub adapted_scratch: EvalResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapted_finetune: Option<EvalResult>,
    pub delta_scratch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_finetune: Option<f64>,
}

fn delta(metric: MetricKind, baseline: f64, adapted: f64) -> f64 {
    match metric {
        MetricKind::AccuracyPct => adapted - baseline,
        MetricKind::MaeYears => baseline - adapted,
    }
}

pub fn recovery_report(
    baseline: &EvalResult,
    adapted_scratch: &EvalResult,
    adapted_finetune: Option<&EvalResult>,
) -> Result<RecoveryReport> {
    baseline.validate()?;
    adapted_scratch.validate()?;
    for other in std::iter::once(adapted_scratch).chain(adapted_finetune) {
        if other.metric_kind != baseline.metric_kind {
            return Err(Error::Contract(format!(
                "metric mismatch: {:?} vs {:?}",
                other.metric_kind, baseline.metric_kind
            )));
        }
        if other.domain_evaluated != baseline.domain_evaluated {
            return Err(Error::Contract(format!(
                "domain mismatch: {} vs {}",
                other.domain_evaluated, baseline.domain_evaluated
            )));
        }
    }
    Ok(RecoveryReport {
        baseline_no_da: baseline.clone(),
        adapted_scratch: adapted_scratch.clone(),
        adapted_finetune: adapted_finetune.cloned(),
        delta_scratch: delta(baseline.metric_kind, baseline.value, adapted_scratch.value),
        delta_finetune: adapted_finetune
            .map(|f| delta(baseline.metric_kind, baseline.value, f.value)),
    })
}

const EVAL_BATCH: usize = 64;

/// Eval-mode predictions; accuracy for classifiers (argmax over logits, or
/// sigmoid > 0.5 for binary), MAE for regression.
pub fn evaluate(
    net: &mut Network<f32>,
    kind: TaskKind,
    images: &Tensor<f32>,
    classes: Option<&[u8]>,
    values: Option<&[f64]>,
    domain_evaluated: &str,
    model_id: &str,
) -> Result<EvalResult> {
    let n = images.shape()[0];
    if n == 0 {
        return Err(Error::Size("cannot evaluate on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0); // eval mode draws nothing
    let mut correct = 0usize;
    let mut abs_err = 0.0f64;
    let mut i = 0usize;
    while i < n {
        let j = (i + EVAL_BATCH).min(n);
        let idx: Vec<usize> = (i..j).collect();
        let batch = gather_rows(images, &idx);
        let out = net.forward(&batch, false, &mut rng);
        let per = out.numel() / out.shape()[0];
        match kind {
            TaskKind::Digit3Class => {
                let classes = classes.ok_or_else(|| Error::Contract("missing class labels".into()))?;
                for (b, &gi) in idx.iter().enumerate() {
                    let row = &out.data()[b * per..(b + 1) * per];
                    let mut best = 0usize;
                    for k in 1..per {
                        if row[k] > row[best] {
                            best = k;
                        }
                    }
                    if best == classes[gi] as usize {
                        correct += 1;
                    }
                }
            }
            TaskKind::Sex | TaskKind::Blob => {
                let classes = classes.ok_or_else(|| Error::Contract("missing class labels".into()))?;
                for (b, &gi) in idx.iter().enumerate() {
                    let p = out.data()[b * per];
                    let pred = (p > 0.5) as u8;
                    if pred == classes[gi] {
                        correct += 1;
                    }
                }
            }
            TaskKind::Age => {
                let values = values.ok_or_else(|| Error::Contract("missing regression targets".into()))?;
                for (b, &gi) in idx.iter().enumerate() {
                    abs_err += (out.data()[b * per] as f64 - values[gi]).abs();
                }
            }
        }
        i = j;
    }
    let result = match kind {
        TaskKind::Age => EvalResult {
            metric_kind: MetricKind::MaeYears,
            value: abs_err / n as f64,
            n,
            domain_evaluated: domain_evaluated.to_string(),
            model_id: model_id.to_string(),
        },
        _ => EvalResult {
            metric_kind: MetricKind::AccuracyPct,
            value: 100.0 * correct as f64 / n as f64,
            n,
            domain_evaluated: domain_evaluated.to_string(),
            model_id: model_id.to_string(),
        },
    };
    result.validate()?;
    Ok(result)
}

/// Convergence settings for task-model training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_betas: (f64, f64),
    pub seed: u64,
    /// Early stopping: fraction of the training set held out for validation,
    /// patience in epochs without improvement.
    pub val_fraction: f64,
    pub patience: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            max_epochs: 30,
            batch_size: 64,
            lr: 1e-3,
            adam_betas: (0.9, 0.999),
            seed: 0,
            val_fraction: 0.1,
            patience: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineReport {
    pub val_losses: Vec<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

fn mean_task_loss(
    task: &mut TaskTrainer<f32>,
    images: &Tensor<f32>,
    classes: Option<&[u8]>,
    values: Option<&[f64]>,
) -> Result<f64> {
    let n = images.shape()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    let mut i = 0;
    while i < n {
        let j = (i + EVAL_BATCH).min(n);
        let idx: Vec<usize> = (i..j).collect();
        let batch = gather_rows(images, &idx);
        let out = task.net.forward(&batch, false, &mut rng);
        let loss = match (classes, values) {
            (Some(c), _) => {
                let sel: Vec<u8> = idx.iter().map(|&k| c[k]).collect();
                task.eval_loss(&out, &TaskTarget::Classes(&sel))?
            }
            (None, Some(v)) => {
                let sel: Vec<f64> = idx.iter().map(|&k| v[k]).collect();
                task.eval_loss(&out, &TaskTarget::Values(&sel))?
            }
            _ => return Err(Error::Contract("missing labels".into())),
        };
        total += loss * (j - i) as f64;
        i = j;
    }
    Ok(total / n as f64)
}

/// Trains a task model to the early-stopping criterion (validation plateau,
/// restoring the best-epoch parameters).
pub fn train_task(
    kind: TaskKind,
    images: &Tensor<f32>,
    classes: Option<&[u8]>,
    values: Option<&[f64]>,
    cfg: &BaselineConfig,
    init: Option<&mut Network<f32>>,
) -> Result<(TaskTrainer<f32>, BaselineReport)> {
    let n = images.shape()[0];
    if n < 2 {
        return Err(Error::Size("need at least two images to train".into()));
    }
    let seeds = SeedStream::new(cfg.seed);
    let net = match init {
        Some(existing) => existing.duplicate()?,
        None => crate::models::build_task_model(kind, &mut seeds.rng(1))?,
    };
    let mut task = TaskTrainer::from_network(kind, net, cfg.lr, cfg.adam_betas, seeds.rng(2));

    let perm = shuffled_indices(n, &mut seeds.rng(3));
    let n_val = ((n as f64 * cfg.val_fraction) as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = perm.split_at(n_val);
    let train_images = gather_rows(images, train_idx);
    let val_images = gather_rows(images, val_idx);
    let select_u8 = |src: Option<&[u8]>, idx: &[usize]| -> Option<Vec<u8>> {
        src.map(|s| idx.iter().map(|&i| s[i]).collect())
    };
    let select_f64 = |src: Option<&[f64]>, idx: &[usize]| -> Option<Vec<f64>> {
        src.map(|s| idx.iter().map(|&i| s[i]).collect())
    };
    let train_classes = select_u8(classes, train_idx);
    let val_classes = select_u8(classes, val_idx);
    let train_values = select_f64(values, train_idx);
    let val_values = select_f64(values, val_idx);

    let nt = train_idx.len();
    let batch = cfg.batch_size.min(nt);
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params: Vec<Vec<f32>> = Vec::new();
    let mut best_state: Vec<Vec<f32>> = Vec::new();
    let mut val_losses = Vec::new();
    let mut epochs_run = 0usize;
    for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        let order = shuffled_indices(nt, &mut seeds.item_rng(4, epoch as u64));
        for chunk in order.chunks(batch) {
            if chunk.len() < batch {
                break;
            }
            let b_imgs = gather_rows(&train_images, chunk);
            let target = match (&train_classes, &train_values) {
                (Some(c), _) => {
                    let sel: Vec<u8> = chunk.iter().map(|&k| c[k]).collect();
                    task.train_step(&b_imgs, &TaskTarget::Classes(&sel))?
                }
                (None, Some(v)) => {
                    let sel: Vec<f64> = chunk.iter().map(|&k| v[k]).collect();
                    task.train_step(&b_imgs, &TaskTarget::Values(&sel))?
                }
                _ => return Err(Error::Contract("missing labels".into())),
            };
            let _ = target;
        }
        let val_loss = mean_task_loss(&mut task, &val_images, val_classes.as_deref(), val_values.as_deref())?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!(
                "validation loss became non-finite at epoch {epoch}"
            )));
        }
        val_losses.push(val_loss);
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best_params.clear();
            task.net.visit_params(&mut |_, p, _| best_params.push(p.clone()));
            best_state.clear();
            task.net.visit_state(&mut |_, s| best_state.push(s.clone()));
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    // restore the best epoch
    let mut i = 0;
    task.net.visit_params(&mut |_, p, _| {
        p.copy_from_slice(&best_params[i]);
        i += 1;
    });
    let mut i = 0;
    task.net.visit_state(&mut |_, s| {
        s.copy_from_slice(&best_state[i]);
        i += 1;
    });
    Ok((
        task,
        BaselineReport {
            val_losses,
            best_epoch,
            epochs_run,
        },
    ))
}

/// Trains the source-domain baseline model.
pub fn train_baseline(
    kind: TaskKind,
    images: &Tensor<f32>,
    classes: Option<&[u8]>,
    values: Option<&[f64]>,
    cfg: &BaselineConfig,
) -> Result<(TaskTrainer<f32>, BaselineReport)> {
    train_task(kind, images, classes, values, cfg, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptMode {
    Scratch,
    Finetune,
}

impl std::str::FromStr for AdaptMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scratch" => Ok(AdaptMode::Scratch),
            "finetune" => Ok(AdaptMode::Finetune),
            other => Err(Error::Config(format!("unknown adapt mode '{other}'"))),
        }
    }
}

/// Runs source images through a trained ISTN, batched.
///
/// The forward uses batch statistics (train-mode normalization), matching
/// the distribution the generator produced during adversarial training and
/// the one the downstream task model is retrained on; running-average eval
/// statistics visibly wash out the learned appearance shift. Deterministic
/// for a fixed image order (fixed batching, seeded rng).
pub fn transfer_images(istn: &mut IstnModel<f32>, images: &Tensor<f32>) -> Result<Tensor<f32>> {
    let n = images.shape()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Tensor::zeros(images.shape());
    let mut i = 0;
    while i < n {
        let j = (i + EVAL_BATCH).min(n);
        let idx: Vec<usize> = (i..j).collect();
        let batch = gather_rows(images, &idx);
        let s2t = istn.forward(&batch, true, &mut rng)?;
        for (b, &gi) in idx.iter().enumerate() {
            out.sample_mut(gi).copy_from_slice(s2t.sample(b));
        }
        i = j;
    }
    Ok(out)
}

/// Retrains (`Scratch`) or finetunes (`Finetune`) a task model on the ISTN
/// transfer of the labeled source set. Target data never enters: the
/// adaptation consumes source images and source labels only.
pub fn adapt_task(
    baseline: &mut TaskTrainer<f32>,
    istn: &mut IstnModel<f32>,
    source_images: &Tensor<f32>,
    source_classes: Option<&[u8]>,
    source_values: Option<&[f64]>,
    mode: AdaptMode,
    cfg: &BaselineConfig,
) -> Result<(TaskTrainer<f32>, BaselineReport)> {
    if cfg.max_epochs == 0 && mode == AdaptMode::Finetune {
        // finetuning for zero epochs returns the baseline unchanged
        let net = baseline.net.duplicate()?;
        let task = TaskTrainer::from_network(
            baseline.kind,
            net,
            cfg.lr,
            cfg.adam_betas,
            SeedStream::new(cfg.seed).rng(2),
        );
        return Ok((
            task,
            BaselineReport {
                val_losses: vec![],
                best_epoch: 0,
                epochs_run: 0,
            },
        ));
    }
    let s2t = transfer_images(istn, source_images)?;
    match mode {
        AdaptMode::Scratch => train_task(baseline.kind, &s2t, source_classes, source_values, cfg, None),
        AdaptMode::Finetune => {
            let mut init = baseline.net.duplicate()?;
            train_task(
                baseline.kind,
                &s2t,
                source_classes,
                source_values,
                cfg,
                Some(&mut init),
            )
        }
    }
}

/// One row of the recovery table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub use_itn: bool,
    pub stn: StnChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_spacing: Option<usize>,
    /// target-domain id -> report
    pub per_target: BTreeMap<String, RecoveryReport>,
}

/// Table-1-shaped summary: per (ITN?, STN, spacing) row, Acc_s / delta_s /
/// Acc_f / delta_f columns for each target domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryTable {
    pub source_domain: String,
    pub targets: Vec<String>,
    /// no-DA baseline per target domain
    pub baselines: BTreeMap<String, f64>,
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryTable {
    fn row_label(row: &RecoveryRow) -> (String, String) {
        let itn = if row.use_itn { "yes" } else { "no" }.to_string();
        let stn = match (row.stn, row.cp_spacing) {
            (StnChoice::None, _) => "no".to_string(),
            (StnChoice::Affine, _) => "affine".to_string(),
            (StnChoice::Bspline, Some(s)) => format!("bspline({s})"),
            (StnChoice::Bspline, None) => "bspline".to_string(),
        };
        (itn, stn)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = "itn,stn".to_string();
        for t in &self.targets {
            write!(header, ",{t}_acc_s,{t}_delta_s,{t}_acc_f,{t}_delta_f").unwrap();
        }
        out.push_str(&header);
        out.push('\n');
        let mut base = "no,no".to_string();
        for t in &self.targets {
            let b = self.baselines.get(t).copied().unwrap_or(f64::NAN);
            write!(base, ",{b:.1},,,").unwrap();
        }
        out.push_str(&base);
        out.push('\n');
        for row in &self.rows {
            let (itn, stn) = Self::row_label(row);
            let mut line = format!("{itn},{stn}");
            for t in &self.targets {
                match row.per_target.get(t) {
                    Some(rep) => {
                        write!(line, ",{:.1},{:.1}", rep.adapted_scratch.value, rep.delta_scratch)
                            .unwrap();
                        match (&rep.adapted_finetune, rep.delta_finetune) {
                            (Some(f), Some(d)) => write!(line, ",{:.1},{:.1}", f.value, d).unwrap(),
                            _ => line.push_str(",,"),
                        }
                    }
                    None => line.push_str(",,,,"),
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut header = "| ITN | STN |".to_string();
        let mut sep = "|---|---|".to_string();
        for t in &self.targets {
            write!(header, " {t} Acc_s | Δ_s | Acc_f | Δ_f |").unwrap();
            sep.push_str("---|---|---|---|");
        }
        out.push_str(&header);
        out.push('\n');
        out.push_str(&sep);
        out.push('\n');
        let mut base = "| no | no |".to_string();
        for t in &self.targets {
            let b = self.baselines.get(t).copied().unwrap_or(f64::NAN);
            write!(base, " {b:.1} | | | |").unwrap();
        }
        out.push_str(&base);
        out.push('\n');
        for row in &self.rows {
            let (itn, stn) = Self::row_label(row);
            let mut line = format!("| {itn} | {stn} |");
            for t in &self.targets {
                match row.per_target.get(t) {
                    Some(rep) => {
                        write!(line, " {:.1} | {:.1} |", rep.adapted_scratch.value, rep.delta_scratch)
                            .unwrap();
                        match (&rep.adapted_finetune, rep.delta_finetune) {
                            (Some(f), Some(d)) => write!(line, " {:.1} | {d:.1} |", f.value).unwrap(),
                            _ => line.push_str("  |  |"),
                        }
                    }
                    None => line.push_str("  |  |  |  |"),
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("recovery.csv"), self.to_csv())?;
        std::fs::write(dir.join("recovery.md"), self.to_markdown())?;
        crate::io::write_json(&dir.join("recovery.json"), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(value: f64, domain: &str, model: &str) -> EvalResult {
        EvalResult {
            metric_kind: MetricKind::AccuracyPct,
            value,
            n: 100,
            domain_evaluated: domain.into(),
            model_id: model.into(),
        }
    }

    #[test]
    fn recovery_deltas_follow_improvement_convention() {
        let rep = recovery_report(&acc(41.2, "B", "base"), &acc(79.0, "B", "scratch"), None).unwrap();
        assert!((rep.delta_scratch - 37.8).abs() < 1e-9);

        let mae = |v: f64, m: &str| EvalResult {
            metric_kind: MetricKind::MaeYears,
            value: v,
            n: 50,
            domain_evaluated: "T".into(),
            model_id: m.into(),
        };
        let rep = recovery_report(&mae(5.13, "base"), &mae(4.71, "scratch"), None).unwrap();
        assert!((rep.delta_scratch - 0.42).abs() < 1e-9);
    }

    #[test]
    fn equal_performance_gives_zero_delta() {
        let rep = recovery_report(&acc(60.0, "B", "a"), &acc(60.0, "B", "b"), None).unwrap();
        assert_eq!(rep.delta_scratch, 0.0);
    }

    #[test]
    fn metric_mismatch_is_contract_error() {
        let mae = EvalResult {
            metric_kind: MetricKind::MaeYears,
            value: 5.0,
            n: 10,
            domain_evaluated: "B".into(),
            model_id: "x".into(),
        };
        assert!(matches!(
            recovery_report(&acc(50.0, "B", "a"), &mae, None),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn perfect_predictions_give_perfect_metrics() {
        use crate::nn::{LayerSpec, NetworkSpec};
        // a 1x1 conv "network" we can force to produce what we want is
        // overkill; instead check the arithmetic through evaluate() with a
        // trivially separable setup: one-pixel images and a linear layer.
        let spec = NetworkSpec {
            name: "probe".into(),
            dim: 2,
            input_shape: vec![1, 1, 1],
            layers: vec![LayerSpec::linear(3)],
            skips: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::<f32>::build(spec, &mut rng).unwrap();
        // weights: logit_k = w_k * x; choose w = [-10, 0, 10] so x<0 -> class
        // 0, x>0 -> class 2
        net.visit_params(&mut |name, p, _| {
            if name == "0.w" {
                p.copy_from_slice(&[-10.0, 0.0, 10.0]);
            } else {
                p.iter_mut().for_each(|v| *v = 0.0);
            }
        });
        let images = Tensor::from_vec(&[4, 1, 1, 1], vec![-1.0, 1.0, -0.5, 0.8]).unwrap();
        let classes = vec![0u8, 2, 0, 2];
        let r = evaluate(
            &mut net,
            TaskKind::Digit3Class,
            &images,
            Some(&classes),
            None,
            "toy",
            "probe",
        )
        .unwrap();
        assert_eq!(r.value, 100.0);
        // repeated evaluation is identical
        let r2 = evaluate(
            &mut net,
            TaskKind::Digit3Class,
            &images,
            Some(&classes),
            None,
            "toy",
            "probe",
        )
        .unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn constant_regressor_mae_equals_mean_abs_deviation() {
        use crate::nn::{LayerSpec, NetworkSpec};
        let spec = NetworkSpec {
            name: "const".into(),
            dim: 2,
            input_shape: vec![1, 1, 1],
            layers: vec![LayerSpec::linear(1)],
            skips: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::<f32>::build(spec, &mut rng).unwrap();
        let ages = [50.0, 60.0, 70.0, 80.0];
        let mean = 65.0;
        net.visit_params(&mut |name, p, _| {
            if name == "0.w" {
                p[0] = 0.0;
            } else {
                p[0] = mean;
            }
        });
        let images = Tensor::from_vec(&[4, 1, 1, 1], vec![0.0; 4]).unwrap();
        let r = evaluate(
            &mut net,
            TaskKind::Age,
            &images,
            None,
            Some(&ages),
            "toy",
            "const",
        )
        .unwrap();
        // mean absolute deviation around 65: (15 + 5 + 5 + 15) / 4 = 10
        assert!((r.value - 10.0).abs() < 1e-5);
    }

    #[test]
    fn empty_dataset_is_size_error() {
        use crate::nn::{LayerSpec, NetworkSpec};
        let spec = NetworkSpec {
            name: "probe".into(),
            dim: 2,
            input_shape: vec![1, 1, 1],
            layers: vec![LayerSpec::linear(3)],
            skips: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::<f32>::build(spec, &mut rng).unwrap();
        let images = Tensor::<f32>::zeros(&[0, 1, 1, 1]);
        assert!(matches!(
            evaluate(&mut net, TaskKind::Digit3Class, &images, Some(&[]), None, "d", "m"),
            Err(Error::Size(_))
        ));
    }
}
