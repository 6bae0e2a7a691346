use std::time::Instant;

use istn::eval::{adapt_task, evaluate, train_baseline, AdaptMode, BaselineConfig};
use istn::models::{StnChoice, TaskKind};
use istn::synth::{build_domain, generate_corpus, DomainId, DomainSpec};
use istn::train::{fit, FitData, TrainConfig, Trainer};

fn main() {
    let t0 = Instant::now();
    let n_train = 2000;
    let n_test = 400;
    let per = n_train + n_test + 400;
    let corpus = generate_corpus(2 * per, 1);
    println!("[{:.1}s] corpus of {} glyphs", t0.elapsed().as_secs_f64(), corpus.len());

    let spec_a = DomainSpec { seed: 11, ..DomainSpec::standard(DomainId::A, 0) }.with_sizes(n_train, n_test);
    let spec_b = DomainSpec { seed: 12, ..DomainSpec::standard(DomainId::B, 0) }.with_sizes(n_train, n_test);
    let a = build_domain(&spec_a, &corpus[..per]).unwrap();
    let b = build_domain(&spec_b, &corpus[per..]).unwrap();
    println!("[{:.1}s] domains built", t0.elapsed().as_secs_f64());

    let base_cfg = BaselineConfig { max_epochs: 12, seed: 0, ..BaselineConfig::default() };
    let t1 = Instant::now();
    let (mut baseline, rep) = train_baseline(TaskKind::Digit3Class, &a.train.images, Some(&a.train.classes), None, &base_cfg).unwrap();
    println!(
        "[{:.1}s] baseline trained in {:.1}s ({} epochs, best {})",
        t0.elapsed().as_secs_f64(), t1.elapsed().as_secs_f64(), rep.epochs_run, rep.best_epoch
    );
    let acc_a = evaluate(&mut baseline.net, TaskKind::Digit3Class, &a.test.images, Some(&a.test.classes), None, "A", "base").unwrap();
    let acc_b = evaluate(&mut baseline.net, TaskKind::Digit3Class, &b.test.images, Some(&b.test.classes), None, "B", "base").unwrap();
    println!("baseline: A {:.1}%  B(no-DA) {:.1}%", acc_a.value, acc_b.value);

    // adversarial ITN-only A->B
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 16,
        seed: 0,
        use_itn: true,
        stn: StnChoice::None,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    let sub = 1024.min(n_train);
    let idx: Vec<usize> = (0..sub).collect();
    let src = istn::train::gather_rows(&a.train.images, &idx);
    let src_cls: Vec<u8> = a.train.classes[..sub].to_vec();
    let tgt = istn::train::gather_rows(&b.train.images, &idx);
    let data = FitData::classification(&src, &src_cls, &tgt);
    let t2 = Instant::now();
    let outcome = fit(&cfg, 2, false, None, &data, None).unwrap();
    let mut trainer = outcome.trainer;
    for e in &outcome.record.epochs {
        println!(
            "epoch {}: l_dis {:.3} l_adv {:.3} l_idt {:.4} ({:.1}s)",
            e.epoch, e.l_dis, e.l_adv, e.l_idt, e.wall_s
        );
    }
    println!("[{:.1}s] adversarial 2 epochs took {:.1}s", t0.elapsed().as_secs_f64(), t2.elapsed().as_secs_f64());

    // scratch retrain on transfer
    let task_cfg = BaselineConfig { max_epochs: 6, patience: 3, seed: 0, ..BaselineConfig::default() };
    let t3 = Instant::now();
    let istn_model = match &mut trainer { Trainer::Uni(t) => &mut t.unit.istn, Trainer::Bi(t) => &mut t.fwd };
    let (mut scratch, _) = adapt_task(&mut baseline, istn_model, &a.train.images, Some(&a.train.classes), None, AdaptMode::Scratch, &task_cfg).unwrap();
    let acc_s = evaluate(&mut scratch.net, TaskKind::Digit3Class, &b.test.images, Some(&b.test.classes), None, "B", "scratch").unwrap();
    println!(
        "[{:.1}s] scratch retrain {:.1}s -> B accuracy {:.1}% (baseline was {:.1}%)",
        t0.elapsed().as_secs_f64(), t3.elapsed().as_secs_f64(), acc_s.value, acc_b.value
    );
}
