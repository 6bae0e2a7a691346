//! End-to-end experiment orchestration with idempotent, stage-wise resume:
//! synth -> baseline -> adapt -> evaluate -> report. Completed stages are
//! detected from their artifacts and never recomputed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    adapt_task, evaluate, recovery_report, train_baseline, AdaptMode, EvalResult, RecoveryRow,
    RecoveryTable,
};
use crate::io;
use crate::models::{pack_network, unpack_network, TaskKind};
use crate::nn::Checkpoint;
use crate::synth::{
    build_domain, dataset_matches, generate_corpus, load_dataset, save_dataset, DomainDataset,
    DomainId, DomainSpec,
};
use crate::tensor::Tensor;
use crate::train::{fit, ExperimentRecord, FitData, RunStatus, TaskTrainer, Trainer};

use super::config::{ExperimentConfig, VariantSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: VariantSpec,
    pub seed: u64,
    pub target: DomainId,
    pub acc_scratch: f64,
    pub delta_scratch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_finetune: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_finetune: Option<f64>,
    pub record: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub baseline_in_domain: f64,
    pub baseline_no_da: BTreeMap<String, f64>,
    pub runs: Vec<RunSummary>,
    pub status: RunStatus,
    pub code_version: String,
}

fn dataset_dir(out: &Path, id: DomainId) -> PathBuf {
    out.join("datasets").join(id.to_string())
}

fn run_dir(out: &Path, target: DomainId, variant: &VariantSpec, seed: u64) -> PathBuf {
    out.join("runs")
        .join(format!("{target}_{}_s{seed}", variant.label()))
}

/// Stage 1: synthesize (or reuse) the source and target datasets.
pub fn stage_synth(cfg: &ExperimentConfig, out: &Path) -> Result<BTreeMap<DomainId, DomainDataset>> {
    let mut domains = vec![cfg.source];
    domains.extend(cfg.targets.iter().copied());
    let per = cfg.dataset.n_train + cfg.dataset.n_test;
    // one corpus partitioned across domains (with slack for skipped glyphs)
    let slack = per / 8 + 64;
    let corpus = generate_corpus(domains.len() * (per + slack), cfg.dataset.corpus_seed);
    let mut out_map = BTreeMap::new();
    for (k, id) in domains.into_iter().enumerate() {
        let dir = dataset_dir(out, id);
        let spec = DomainSpec {
            seed: cfg.dataset.data_seed.wrapping_add(k as u64),
            ..DomainSpec::standard(id, 0)
        }
        .with_sizes(cfg.dataset.n_train, cfg.dataset.n_test);
        let ds = if dataset_matches(&dir, &spec) {
            load_dataset(&dir)?
        } else {
            let slice = &corpus[k * (per + slack)..(k + 1) * (per + slack)];
            let ds = build_domain(&spec, slice)?;
            save_dataset(&dir, &ds)?;
            ds
        };
        out_map.insert(id, ds);
    }
    Ok(out_map)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BaselineArtifacts {
    in_domain: f64,
    no_da: BTreeMap<String, f64>,
}

/// Stage 2: train (or reload) the source baseline and its no-DA evaluations.
pub fn stage_baseline(
    cfg: &ExperimentConfig,
    out: &Path,
    datasets: &BTreeMap<DomainId, DomainDataset>,
) -> Result<(TaskTrainer<f32>, BaselineArtifactsPub)> {
    let dir = out.join("baseline");
    let ckpt = dir.join("model");
    let eval_path = dir.join("eval.json");
    let source = &datasets[&cfg.source];
    if ckpt.with_extension("json").exists() && eval_path.exists() {
        let mut net = crate::models::build_task_model::<f32>(
            TaskKind::Digit3Class,
            &mut crate::rng::SeedStream::new(0).rng(1),
        )?;
        let ck = Checkpoint::<f32>::load(&ckpt)?;
        unpack_network(&ck, "task", &mut net)?;
        let task = TaskTrainer::from_network(
            TaskKind::Digit3Class,
            net,
            cfg.baseline.lr,
            cfg.baseline.adam_betas,
            crate::rng::SeedStream::new(0).rng(2),
        );
        let arts: BaselineArtifacts = io::read_json(&eval_path)?;
        return Ok((task, BaselineArtifactsPub {
            in_domain: arts.in_domain,
            no_da: arts.no_da,
        }));
    }
    let (mut task, report) = train_baseline(
        TaskKind::Digit3Class,
        &source.train.images,
        Some(&source.train.classes),
        None,
        &cfg.baseline,
    )?;
    let in_domain = evaluate(
        &mut task.net,
        TaskKind::Digit3Class,
        &source.test.images,
        Some(&source.test.classes),
        None,
        &cfg.source.to_string(),
        "baseline",
    )?
    .value;
    let mut no_da = BTreeMap::new();
    for id in &cfg.targets {
        let ds = &datasets[id];
        let r = evaluate(
            &mut task.net,
            TaskKind::Digit3Class,
            &ds.test.images,
            Some(&ds.test.classes),
            None,
            &id.to_string(),
            "baseline",
        )?;
        no_da.insert(id.to_string(), r.value);
    }
    let mut ck = Checkpoint::new();
    pack_network(&mut ck, "task", &mut task.net);
    ck.save(&ckpt)?;
    io::write_json(&dir.join("report.json"), &report)?;
    io::write_json(&eval_path, &BaselineArtifacts {
        in_domain,
        no_da: no_da.clone(),
    })?;
    Ok((task, BaselineArtifactsPub { in_domain, no_da }))
}

/// Public mirror of the baseline artifacts.
#[derive(Clone, Debug)]
pub struct BaselineArtifactsPub {
    pub in_domain: f64,
    pub no_da: BTreeMap<String, f64>,
}

fn subset_rows(t: &Tensor<f32>, n: usize) -> Tensor<f32> {
    if t.shape()[0] <= n {
        return t.clone();
    }
    let idx: Vec<usize> = (0..n).collect();
    crate::train::gather_rows(t, &idx)
}

/// Stages 3-4 for one (target, variant, seed): adversarial fit (resumable)
/// plus adapted-model evaluation.
#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &ExperimentConfig,
    out: &Path,
    datasets: &BTreeMap<DomainId, DomainDataset>,
    baseline: &mut TaskTrainer<f32>,
    baseline_no_da: f64,
    target: DomainId,
    variant: &VariantSpec,
    seed: u64,
) -> Result<RunSummary> {
    let dir = run_dir(out, target, variant, seed);
    let record_path = dir.join("record.json");
    let eval_path = dir.join("adapted.json");
    let run_cfg = cfg.adapt.for_variant(variant, seed);
    let source = &datasets[&cfg.source];
    let target_ds = &datasets[&target];

    #[derive(Serialize, Deserialize)]
    struct AdaptedEval {
        acc_scratch: f64,
        delta_scratch: f64,
        acc_finetune: Option<f64>,
        delta_finetune: Option<f64>,
    }

    if record_path.exists() && eval_path.exists() {
        let record = ExperimentRecord::load(&record_path)?;
        if matches!(record.status, RunStatus::Completed) && record.config == run_cfg {
            let ev: AdaptedEval = io::read_json(&eval_path)?;
            return Ok(RunSummary {
                variant: *variant,
                seed,
                target,
                acc_scratch: ev.acc_scratch,
                delta_scratch: ev.delta_scratch,
                acc_finetune: ev.acc_finetune,
                delta_finetune: ev.delta_finetune,
                record: record_path,
            });
        }
    }

    // adversarial stage (resumes from the latest checkpoint when present)
    let cap = cfg.adapt_train_subset.unwrap_or(usize::MAX);
    let src_images = subset_rows(&source.train.images, cap);
    let src_classes: Vec<u8> = source.train.classes[..src_images.shape()[0]].to_vec();
    let tgt_images = subset_rows(&target_ds.train.images, cap);
    let data = FitData::classification(&src_images, &src_classes, &tgt_images);

    let mut trainer = Trainer::build(&run_cfg, 2, false, Some(TaskKind::Digit3Class))?;
    let final_ckpt = dir.join("ckpt_final");
    let record = if final_ckpt.with_extension("json").exists() {
        trainer.load_checkpoint(&final_ckpt)?;
        ExperimentRecord::load(&record_path)
            .unwrap_or_else(|_| ExperimentRecord::new(run_cfg.clone()))
    } else {
        let record = crate::train::fit_into(&run_cfg, &mut trainer, &data, Some(&dir), 0)?;
        record.save(&record_path)?;
        record
    };
    if let RunStatus::Failed { stage } = &record.status {
        return Err(Error::Training(format!(
            "adversarial run {} failed: {stage}",
            dir.display()
        )));
    }

    // adapted task models on the final ISTN output
    let istn = trainer.istn_mut();
    let (mut scratch, _) = adapt_task(
        baseline,
        istn,
        &source.train.images,
        Some(&source.train.classes),
        None,
        AdaptMode::Scratch,
        &cfg.adapt_task,
    )?;
    let acc_s = evaluate(
        &mut scratch.net,
        TaskKind::Digit3Class,
        &target_ds.test.images,
        Some(&target_ds.test.classes),
        None,
        &target.to_string(),
        "scratch",
    )?;
    let base_eval = EvalResult {
        metric_kind: acc_s.metric_kind,
        value: baseline_no_da,
        n: acc_s.n,
        domain_evaluated: acc_s.domain_evaluated.clone(),
        model_id: "baseline".into(),
    };
    let (acc_f, delta_f) = if cfg.finetune {
        let (mut fine, _) = adapt_task(
            baseline,
            istn,
            &source.train.images,
            Some(&source.train.classes),
            None,
            AdaptMode::Finetune,
            &cfg.adapt_task,
        )?;
        let r = evaluate(
            &mut fine.net,
            TaskKind::Digit3Class,
            &target_ds.test.images,
            Some(&target_ds.test.classes),
            None,
            &target.to_string(),
            "finetune",
        )?;
        let rep = recovery_report(&base_eval, &acc_s, Some(&r))?;
        (Some(r.value), rep.delta_finetune)
    } else {
        (None, None)
    };
    let rep = recovery_report(&base_eval, &acc_s, None)?;
    io::write_json(&eval_path, &AdaptedEval {
        acc_scratch: acc_s.value,
        delta_scratch: rep.delta_scratch,
        acc_finetune: acc_f,
        delta_finetune: delta_f,
    })?;
    Ok(RunSummary {
        variant: *variant,
        seed,
        target,
        acc_scratch: acc_s.value,
        delta_scratch: rep.delta_scratch,
        acc_finetune: acc_f,
        delta_finetune: delta_f,
        record: record_path,
    })
}

/// Executes the whole experiment; reruns resume from completed artifacts.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let config_path = out.join("config.json");
    if config_path.exists() {
        let existing: ExperimentConfig = io::read_json(&config_path)?;
        if existing != *cfg {
            return Err(Error::Config(format!(
                "{} holds a different experiment config",
                out.display()
            )));
        }
    } else {
        io::write_json(&config_path, cfg)?;
    }
    let datasets = stage_synth(cfg, out)?;
    let (mut baseline, base_arts) = stage_baseline(cfg, out, &datasets)?;

    let mut runs = Vec::new();
    for target in &cfg.targets {
        for variant in &cfg.variants {
            for &seed in &cfg.seeds {
                runs.push(run_one(
                    cfg,
                    out,
                    &datasets,
                    &mut baseline,
                    base_arts.no_da[&target.to_string()],
                    *target,
                    variant,
                    seed,
                )?);
            }
        }
    }

    // aggregate into the Table-1-shaped recovery table (seed means)
    let mut rows = Vec::new();
    for variant in &cfg.variants {
        let mut per_target = BTreeMap::new();
        for target in &cfg.targets {
            let sel: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.variant == *variant && r.target == *target)
                .collect();
            if sel.is_empty() {
                continue;
            }
            let mean = |f: &dyn Fn(&RunSummary) -> f64| {
                sel.iter().map(|r| f(r)).sum::<f64>() / sel.len() as f64
            };
            let acc_s = mean(&|r| r.acc_scratch);
            let n = datasets[target].test.len();
            let base = EvalResult {
                metric_kind: crate::eval::MetricKind::AccuracyPct,
                value: base_arts.no_da[&target.to_string()],
                n,
                domain_evaluated: target.to_string(),
                model_id: "baseline".into(),
            };
            let scratch = EvalResult {
                metric_kind: crate::eval::MetricKind::AccuracyPct,
                value: acc_s,
                n,
                domain_evaluated: target.to_string(),
                model_id: format!("scratch_mean_{}_seeds", sel.len()),
            };
            let fine = if sel.iter().all(|r| r.acc_finetune.is_some()) {
                Some(EvalResult {
                    metric_kind: crate::eval::MetricKind::AccuracyPct,
                    value: mean(&|r| r.acc_finetune.unwrap()),
                    n,
                    domain_evaluated: target.to_string(),
                    model_id: format!("finetune_mean_{}_seeds", sel.len()),
                })
            } else {
                None
            };
            per_target.insert(
                target.to_string(),
                recovery_report(&base, &scratch, fine.as_ref())?,
            );
        }
        rows.push(RecoveryRow {
            use_itn: variant.use_itn,
            stn: variant.stn,
            cp_spacing: variant.cp_spacing,
            per_target,
        });
    }
    let table = RecoveryTable {
        source_domain: cfg.source.to_string(),
        targets: cfg.targets.iter().map(|t| t.to_string()).collect(),
        baselines: base_arts.no_da.clone(),
        rows,
    };
    table.save(&out.join("tables"))?;

    let summary = ExperimentSummary {
        config: cfg.clone(),
        baseline_in_domain: base_arts.in_domain,
        baseline_no_da: base_arts.no_da,
        runs,
        status: RunStatus::Completed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    io::write_json(&out.join("record.json"), &summary)?;
    Ok(summary)
}

/// Loads the trained forward ISTN out of a run checkpoint.
pub fn load_istn_checkpoint(base: &Path) -> Result<(crate::models::IstnModel<f32>, crate::train::TrainConfig)> {
    let ck = Checkpoint::<f32>::load(base)?;
    let cfg: crate::train::TrainConfig = ck.extra("train_config")?;
    let dim: usize = ck.extra("dim")?;
    let slim: bool = ck.extra("slim")?;
    let mut rng = crate::rng::SeedStream::new(cfg.seed).rng(10);
    let mut istn =
        crate::models::IstnModel::build(cfg.use_itn, cfg.stn, dim, cfg.cp_spacing, slim, &mut rng)?;
    let prefix = if ck.manifest.entries.keys().any(|k| k.starts_with("fwd.")) {
        "fwd"
    } else {
        "istn"
    };
    crate::models::unpack_istn(&ck, prefix, &mut istn)?;
    Ok((istn, cfg))
}

/// Convenience re-export used by the CLI: fit + persist in one call.
pub fn fit_and_save(
    run_cfg: &crate::train::TrainConfig,
    dim: usize,
    slim: bool,
    task: Option<TaskKind>,
    data: &FitData,
    dir: &Path,
) -> Result<ExperimentRecord> {
    let outcome = fit(run_cfg, dim, slim, task, data, Some(dir))?;
    outcome.record.save(&dir.join("record.json"))?;
    Ok(outcome.record)
}
