use std::time::Instant;

use istn::eval::{adapt_task, evaluate, train_baseline, AdaptMode, BaselineConfig};
use istn::models::{StnChoice, TaskKind};
use istn::synth::{build_domain, generate_corpus, DomainDataset, DomainId, DomainSpec};
use istn::train::{fit, FitData, TrainConfig, Trainer};

fn build(domain: DomainId, corpus: &[istn::synth::DigitImage], seed: u64, n_train: usize, n_test: usize) -> DomainDataset {
    build_domain(
        &DomainSpec { seed, ..DomainSpec::standard(domain, 0) }.with_sizes(n_train, n_test),
        corpus,
    )
    .unwrap()
}

fn main() {
    // args: n_train epochs subset batch use_itn stn target seed lr lambda
    let a: Vec<String> = std::env::args().collect();
    let n_train: usize = a.get(1).map(|s| s.parse().unwrap()).unwrap_or(9000);
    let epochs: usize = a.get(2).map(|s| s.parse().unwrap()).unwrap_or(10);
    let subset: usize = a.get(3).map(|s| s.parse().unwrap()).unwrap_or(2048);
    let batch: usize = a.get(4).map(|s| s.parse().unwrap()).unwrap_or(32);
    let use_itn: bool = a.get(5).map(|s| s == "itn").unwrap_or(true);
    let stn: StnChoice = match a.get(6).map(|s| s.as_str()).unwrap_or("none") {
        "affine" => StnChoice::Affine,
        "bspline" => StnChoice::Bspline,
        _ => StnChoice::None,
    };
    let target_id: DomainId = a.get(7).map(|s| s.parse().unwrap()).unwrap_or(DomainId::B);
    let seed: u64 = a.get(8).map(|s| s.parse().unwrap()).unwrap_or(0);
    let lr: f64 = a.get(9).map(|s| s.parse().unwrap()).unwrap_or(2e-4);
    let lambda: f64 = a.get(10).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let n_test = 1500;
    let per = n_train + n_test + n_train / 8 + 64;
    let t0 = Instant::now();
    let corpus = generate_corpus(2 * per, 1);
    let src = build(DomainId::A, &corpus[..per], 11, n_train, n_test);
    let tgt = build(target_id, &corpus[per..], 12, n_train, n_test);
    println!("[{:.0}s] domains A and {target_id} built", t0.elapsed().as_secs_f64());

    let base_cfg = BaselineConfig { seed: 0, ..BaselineConfig::default() };
    let (mut baseline, rep) = train_baseline(TaskKind::Digit3Class, &src.train.images, Some(&src.train.classes), None, &base_cfg).unwrap();
    let acc_a = evaluate(&mut baseline.net, TaskKind::Digit3Class, &src.test.images, Some(&src.test.classes), None, "A", "b").unwrap();
    let acc_t0 = evaluate(&mut baseline.net, TaskKind::Digit3Class, &tgt.test.images, Some(&tgt.test.classes), None, "T", "b").unwrap();
    println!(
        "[{:.0}s] baseline ({} ep, best {}): A {:.1}%  {target_id}(no-DA) {:.1}%",
        t0.elapsed().as_secs_f64(), rep.epochs_run, rep.best_epoch, acc_a.value, acc_t0.value
    );

    let cfg = TrainConfig {
        epochs,
        batch_size: batch,
        seed,
        use_itn,
        stn,
        cp_spacing: if stn == StnChoice::Bspline { Some(8) } else { None },
        lr_istn: lr,
        lr_dis: lr,
        lambda,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    let sub = subset.min(n_train);
    let idx: Vec<usize> = (0..sub).collect();
    let s_img = istn::train::gather_rows(&src.train.images, &idx);
    let s_cls: Vec<u8> = src.train.classes[..sub].to_vec();
    let t_img = istn::train::gather_rows(&tgt.train.images, &idx);
    let data = FitData::classification(&s_img, &s_cls, &t_img);
    let t1 = Instant::now();
    let outcome = fit(&cfg, 2, false, None, &data, None).unwrap();
    for e in outcome.record.epochs.iter() {
        println!(
            "  ep {}: dis {:.3} adv {:.3} idt {:.4} [{:.0}s]",
            e.epoch, e.l_dis, e.l_adv, e.l_idt, e.wall_s
        );
    }
    println!("[{:.0}s] adversarial fit took {:.0}s", t0.elapsed().as_secs_f64(), t1.elapsed().as_secs_f64());

    let mut trainer = outcome.trainer;
    let istn_model = match &mut trainer { Trainer::Uni(t) => &mut t.unit.istn, Trainer::Bi(t) => &mut t.fwd };
    let task_cfg = BaselineConfig { max_epochs: 12, patience: 5, seed: 0, ..BaselineConfig::default() };
    let t2 = Instant::now();
    let (mut scratch, _) = adapt_task(&mut baseline, istn_model, &src.train.images, Some(&src.train.classes), None, AdaptMode::Scratch, &task_cfg).unwrap();
    let acc_s = evaluate(&mut scratch.net, TaskKind::Digit3Class, &tgt.test.images, Some(&tgt.test.classes), None, "T", "s").unwrap();
    println!(
        "[{:.0}s] RESULT itn={use_itn} stn={stn:?} A->{target_id}: scratch {:.1}% (noDA {:.1}%, in-domain {:.1}%) retrain {:.0}s",
        t0.elapsed().as_secs_f64(), acc_s.value, acc_t0.value, acc_a.value, t2.elapsed().as_secs_f64()
    );
}
