//! `istn` command line: dataset synthesis, baseline training, adversarial
//! adaptation, evaluation, grid search, experiment orchestration, and figure
//! emission.
//!
//! Relative dataset/output paths are resolved against `ISTN_DATA_ROOT` when
//! that variable is set. Exit codes: 0 ok, 1 configuration error, 2 runtime
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use istn::error::Error;
use istn::eval::{evaluate, train_baseline, AdaptMode, BaselineConfig};
use istn::experiment::{
    grid_search, render_figures, run_experiment, ExperimentConfig, FigureKind, FigureRequest,
    GridAxes,
};
use istn::models::{pack_network, unpack_network, StnChoice, TaskKind};
use istn::nn::Checkpoint;
use istn::synth::{
    build_domain, generate_corpus, load_digit_corpus, load_dataset, save_dataset, DomainId,
    DomainSpec,
};
use istn::train::{Direction, FitData, TaskTrainer, TrainConfig, Trainer};

#[derive(Parser)]
#[command(name = "istn", version, about = "Adversarial image-and-spatial transformer toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize one digit domain (train + test splits) into a directory.
    Synth(SynthArgs),
    /// Train the source-domain task model.
    TrainBaseline(TrainBaselineArgs),
    /// Adversarially adapt source -> target and retrain the task model.
    Adapt(AdaptArgs),
    /// Evaluate a task-model checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Hyper-parameter grid search ranked by the label-free proxy.
    Grid(GridArgs),
    /// Run (or resume) a full config-driven experiment.
    Run(RunArgs),
    /// Re-emit tables and print the summary of a completed experiment.
    Report(ReportArgs),
    /// Render difference/deformation/sample figures from a checkpoint.
    Figures(FiguresArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    domain: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 9000)]
    n_train: usize,
    #[arg(long, default_value_t = 1500)]
    n_test: usize,
    #[arg(long)]
    out: PathBuf,
    /// IDX image file for a real digit corpus (otherwise procedural glyphs).
    #[arg(long)]
    corpus_images: Option<PathBuf>,
    /// IDX label file matching --corpus-images.
    #[arg(long)]
    corpus_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    corpus_seed: u64,
}

#[derive(Args)]
struct TrainBaselineArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "digit3class")]
    task: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Baseline model directory (required with --finetune).
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, default_value = "uni")]
    direction: String,
    #[arg(long, default_value = "on")]
    itn: String,
    #[arg(long, default_value = "none")]
    stn: String,
    #[arg(long)]
    cp_spacing: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap the number of train images used in the adversarial loop.
    #[arg(long)]
    subset: Option<usize>,
    /// Also finetune the baseline on the transferred images.
    #[arg(long, default_value_t = false)]
    finetune: bool,
    #[arg(long, default_value_t = 12)]
    task_epochs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Task-model checkpoint base (as written by train-baseline or adapt).
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "accuracy")]
    metric: String,
    /// Evaluate the train split instead of the test split.
    #[arg(long, default_value_t = false)]
    train_split: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.0002")]
    lrs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    cp_spacings: Vec<usize>,
    #[arg(long, default_value = "on")]
    itn: String,
    #[arg(long, default_value = "none")]
    stn: String,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    subset: Option<usize>,
    /// Execute at most this many grid points (partial results flagged).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// ExperimentConfig JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Completed experiment directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FiguresArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    source_dataset: PathBuf,
    #[arg(long)]
    target_dataset: Option<PathBuf>,
    #[arg(long, default_value = "difference")]
    kind: String,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    samples: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    upscale: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Resolve a path against ISTN_DATA_ROOT when it is relative.
fn resolve(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os("ISTN_DATA_ROOT") {
        Some(root) => PathBuf::from(root).join(p),
        None => p.to_path_buf(),
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::Param(_) | Error::Precondition(_) | Error::Size(_)
    )
}

fn save_task_model(dir: &Path, task: &mut TaskTrainer<f32>, name: &str) -> istn::Result<()> {
    let mut ck = Checkpoint::new();
    pack_network(&mut ck, "task", &mut task.net);
    ck.attach("task_kind", &task.kind)?;
    ck.save(&dir.join(name))
}

fn load_task_model(base: &Path) -> istn::Result<TaskTrainer<f32>> {
    let ck = Checkpoint::<f32>::load(base)?;
    let kind: TaskKind = ck.extra("task_kind")?;
    let mut net = istn::models::build_task_model::<f32>(
        kind,
        &mut istn::rng::SeedStream::new(0).rng(1),
    )?;
    unpack_network(&ck, "task", &mut net)?;
    Ok(TaskTrainer::from_network(
        kind,
        net,
        1e-4,
        (0.5, 0.999),
        istn::rng::SeedStream::new(0).rng(2),
    ))
}

fn cmd_synth(args: &SynthArgs) -> istn::Result<()> {
    let domain = DomainId::from_str(&args.domain)?;
    let spec = DomainSpec {
        seed: args.seed,
        ..DomainSpec::standard(domain, 0)
    }
    .with_sizes(args.n_train, args.n_test);
    let corpus = match (&args.corpus_images, &args.corpus_labels) {
        (Some(imgs), Some(labels)) => load_digit_corpus(&resolve(imgs), &resolve(labels))?,
        (None, None) => {
            let need = args.n_train + args.n_test;
            generate_corpus(need + need / 8 + 64, args.corpus_seed)
        }
        _ => {
            return Err(Error::Config(
                "--corpus-images and --corpus-labels must be given together".into(),
            ))
        }
    };
    let ds = build_domain(&spec, &corpus)?;
    let out = resolve(&args.out);
    save_dataset(&out, &ds)?;
    println!(
        "wrote domain {domain} ({} train / {} test) to {}",
        ds.train.len(),
        ds.test.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train_baseline(args: &TrainBaselineArgs) -> istn::Result<()> {
    let kind = TaskKind::from_str(&args.task)?;
    if kind != TaskKind::Digit3Class {
        return Err(Error::Config(
            "only the digit3class task has a synthetic data path".into(),
        ));
    }
    let ds = load_dataset(&resolve(&args.dataset))?;
    let cfg = BaselineConfig {
        max_epochs: args.epochs,
        batch_size: args.batch,
        lr: args.lr,
        seed: args.seed,
        ..BaselineConfig::default()
    };
    let (mut task, report) = train_baseline(
        kind,
        &ds.train.images,
        Some(&ds.train.classes),
        None,
        &cfg,
    )?;
    let out = resolve(&args.out);
    std::fs::create_dir_all(&out)?;
    save_task_model(&out, &mut task, "model")?;
    istn::io::write_json(&out.join("report.json"), &report)?;
    let in_domain = evaluate(
        &mut task.net,
        kind,
        &ds.test.images,
        Some(&ds.test.classes),
        None,
        &ds.spec.domain.to_string(),
        "baseline",
    )?;
    istn::io::write_json(&out.join("eval.json"), &in_domain)?;
    println!(
        "baseline trained ({} epochs, best {}): in-domain accuracy {:.1}%",
        report.epochs_run, report.best_epoch, in_domain.value
    );
    Ok(())
}

fn subset_data(images: &istn::Tensor32, classes: &[u8], cap: Option<usize>) -> (istn::Tensor32, Vec<u8>) {
    match cap {
        Some(n) if n < images.shape()[0] => {
            let idx: Vec<usize> = (0..n).collect();
            (
                istn::train::gather_rows(images, &idx),
                classes[..n].to_vec(),
            )
        }
        _ => (images.clone(), classes.to_vec()),
    }
}

fn cmd_adapt(args: &AdaptArgs) -> istn::Result<()> {
    let source = load_dataset(&resolve(&args.source))?;
    let target = load_dataset(&resolve(&args.target))?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        lr_istn: args.lr,
        lr_dis: args.lr,
        lambda: args.lambda,
        seed: args.seed,
        direction: Direction::from_str(&args.direction)?,
        use_itn: match args.itn.as_str() {
            "on" => true,
            "off" => false,
            other => return Err(Error::Config(format!("--itn must be on/off, got '{other}'"))),
        },
        stn: StnChoice::from_str(&args.stn)?,
        cp_spacing: args.cp_spacing,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let out = resolve(&args.out);
    std::fs::create_dir_all(&out)?;

    let (src_images, src_classes) = subset_data(&source.train.images, &source.train.classes, args.subset);
    let (tgt_images, _) = subset_data(&target.train.images, &target.train.classes, args.subset);
    let data = FitData::classification(&src_images, &src_classes, &tgt_images);
    let mut trainer = Trainer::build(&cfg, 2, false, Some(TaskKind::Digit3Class))?;
    let record = istn::train::fit_into(&cfg, &mut trainer, &data, Some(&out), 0)?;
    record.save(&out.join("record.json"))?;
    if let istn::train::RunStatus::Failed { stage } = &record.status {
        return Err(Error::Training(format!("adaptation failed: {stage}")));
    }

    // retrain the task model on the final transfer
    let task_cfg = BaselineConfig {
        max_epochs: args.task_epochs,
        seed: args.seed,
        ..BaselineConfig::default()
    };
    let mut baseline = match &args.baseline {
        Some(dir) => load_task_model(&resolve(dir).join("model"))?,
        None => {
            // scratch mode does not need trained baseline weights
            TaskTrainer::build(
                TaskKind::Digit3Class,
                task_cfg.lr,
                task_cfg.adam_betas,
                &istn::rng::SeedStream::new(args.seed),
            )?
        }
    };
    let istn_model = trainer.istn_mut();
    let (mut scratch, _) = istn::eval::adapt_task(
        &mut baseline,
        istn_model,
        &source.train.images,
        Some(&source.train.classes),
        None,
        AdaptMode::Scratch,
        &task_cfg,
    )?;
    save_task_model(&out, &mut scratch, "scratch")?;
    let acc_s = evaluate(
        &mut scratch.net,
        TaskKind::Digit3Class,
        &target.test.images,
        Some(&target.test.classes),
        None,
        &target.spec.domain.to_string(),
        "scratch",
    )?;
    println!("scratch model on target test: {:.1}%", acc_s.value);
    if args.finetune {
        if args.baseline.is_none() {
            return Err(Error::Config("--finetune requires --baseline".into()));
        }
        let (mut fine, _) = istn::eval::adapt_task(
            &mut baseline,
            istn_model,
            &source.train.images,
            Some(&source.train.classes),
            None,
            AdaptMode::Finetune,
            &task_cfg,
        )?;
        save_task_model(&out, &mut fine, "finetune")?;
        let acc_f = evaluate(
            &mut fine.net,
            TaskKind::Digit3Class,
            &target.test.images,
            Some(&target.test.classes),
            None,
            &target.spec.domain.to_string(),
            "finetune",
        )?;
        println!("finetuned model on target test: {:.1}%", acc_f.value);
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> istn::Result<()> {
    let mut task = load_task_model(&resolve(&args.model))?;
    let ds = load_dataset(&resolve(&args.dataset))?;
    let split = if args.train_split { &ds.train } else { &ds.test };
    match args.metric.as_str() {
        "accuracy" => {}
        "mae" => {
            return Err(Error::Config(
                "mae applies to regression tasks; the synthetic pipeline is classification".into(),
            ))
        }
        other => return Err(Error::Config(format!("unknown metric '{other}'"))),
    }
    let r = evaluate(
        &mut task.net,
        task.kind,
        &split.images,
        Some(&split.classes),
        None,
        &ds.spec.domain.to_string(),
        "cli",
    )?;
    println!(
        "{} on {} ({} samples): {:.2}%",
        args.model.display(),
        ds.spec.domain,
        r.n,
        r.value
    );
    if let Some(out) = &args.out {
        istn::io::write_json(&resolve(out), &r)?;
    }
    Ok(())
}

fn cmd_grid(args: &GridArgs) -> istn::Result<()> {
    let source = load_dataset(&resolve(&args.source))?;
    let target = load_dataset(&resolve(&args.target))?;
    let base = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        seed: args.seed,
        use_itn: match args.itn.as_str() {
            "on" => true,
            "off" => false,
            other => return Err(Error::Config(format!("--itn must be on/off, got '{other}'"))),
        },
        stn: StnChoice::from_str(&args.stn)?,
        cp_spacing: args.cp_spacings.first().copied(),
        ..TrainConfig::default()
    };
    let axes = GridAxes {
        lr: args.lrs.clone(),
        lambda: args.lambdas.clone(),
        cp_spacing: args.cp_spacings.clone(),
    };
    let (src_images, src_classes) = subset_data(&source.train.images, &source.train.classes, args.subset);
    let (tgt_images, _) = subset_data(&target.train.images, &target.train.classes, args.subset);
    // label-free validation slices for the proxy
    let n_val = (src_images.shape()[0] / 10).max(1);
    let val_idx: Vec<usize> = (0..n_val).collect();
    let src_val = istn::train::gather_rows(&source.test.images, &val_idx);
    let tgt_val = istn::train::gather_rows(&target.test.images, &val_idx);
    let out = resolve(&args.out);
    let outcome = grid_search(
        &base,
        &axes,
        &src_images,
        &src_classes,
        &tgt_images,
        &src_val,
        &tgt_val,
        &out,
        args.budget,
    )?;
    println!(
        "grid: {} points{}; ranking (best first):",
        outcome.entries.len(),
        if outcome.partial { " [partial: budget exhausted]" } else { "" }
    );
    for &i in &outcome.ranking {
        let e = &outcome.entries[i];
        println!(
            "  lr {:.1e} lambda {} spacing {:?} -> proxy {:.4}",
            e.point.lr, e.point.lambda, e.point.cp_spacing, e.proxy_score
        );
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> istn::Result<()> {
    let cfg: ExperimentConfig = istn::io::read_json(&resolve(&args.config))?;
    let out = resolve(&args.out);
    let summary = run_experiment(&cfg, &out)?;
    println!(
        "experiment '{}' complete: baseline in-domain {:.1}%, {} adaptation runs",
        summary.config.name,
        summary.baseline_in_domain,
        summary.runs.len()
    );
    println!("tables under {}", out.join("tables").display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> istn::Result<()> {
    let out = resolve(&args.out);
    let summary: istn::experiment::ExperimentSummary =
        istn::io::read_json(&out.join("record.json"))?;
    let table_md = std::fs::read_to_string(out.join("tables").join("recovery.md"))?;
    println!(
        "experiment '{}': baseline in-domain {:.1}%",
        summary.config.name, summary.baseline_in_domain
    );
    for (domain, acc) in &summary.baseline_no_da {
        println!("  no-DA on {domain}: {acc:.1}%");
    }
    println!("{table_md}");
    Ok(())
}

fn cmd_figures(args: &FiguresArgs) -> istn::Result<()> {
    let req = FigureRequest {
        kind: FigureKind::from_str(&args.kind)?,
        checkpoint: resolve(&args.checkpoint),
        source_dataset: resolve(&args.source_dataset),
        target_dataset: args.target_dataset.as_deref().map(resolve),
        samples: args.samples.clone(),
        out_dir: resolve(&args.out),
        upscale: args.upscale,
    };
    let written = render_figures(&req)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success; bad flags are config errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::TrainBaseline(a) => cmd_train_baseline(a),
        Cmd::Adapt(a) => cmd_adapt(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Grid(a) => cmd_grid(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Figures(a) => cmd_figures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_config_error(&e) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("runtime failure: {e}");
            ExitCode::from(2)
        }
    }
}
