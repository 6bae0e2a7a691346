use std::time::Instant;

use istn::eval::{adapt_task, evaluate, train_baseline, AdaptMode, BaselineConfig};
use istn::models::{StnChoice, TaskKind};
use istn::synth::{
    build_domain, generate_corpus, measure_thickness, DomainDataset, DomainId, DomainSpec, Grid2,
};
use istn::tensor::Tensor;
use istn::train::{fit, gather_rows, FitData, TaskTarget, TrainConfig, Trainer};

fn build(domain: DomainId, corpus: &[istn::synth::DigitImage], seed: u64, nt: usize, ns: usize) -> DomainDataset {
    build_domain(&DomainSpec { seed, ..DomainSpec::standard(domain, 0) }.with_sizes(nt, ns), corpus).unwrap()
}

fn to_grid(row: &[f32]) -> Grid2 {
    Grid2::from_vec(28, 28, row.iter().map(|&v| (v + 1.0) / 2.0).collect())
}

fn components(g: &Grid2) -> usize {
    istn::synth::morpho::component_count(&istn::synth::morpho::binarize(g, 0.5), 28, 28)
}

fn class_acc(net: &mut istn::nn::Network<f32>, images: &Tensor<f32>, classes: &[u8]) -> [f64; 4] {
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let rng: &mut rand_chacha::ChaCha8Rng = &mut rng;
    let mut per = [[0usize; 2]; 3];
    let n = images.shape()[0];
    let mut i = 0;
    while i < n {
        let j = (i + 64).min(n);
        let idx: Vec<usize> = (i..j).collect();
        let out = net.forward(&gather_rows(images, &idx), false, rng);
        let k = out.numel() / out.shape()[0];
        for (b, &gi) in idx.iter().enumerate() {
            let row = &out.data()[b * k..(b + 1) * k];
            let mut best = 0;
            for c in 1..3 {
                if row[c] > row[best] {
                    best = c;
                }
            }
            per[classes[gi] as usize][1] += 1;
            if best == classes[gi] as usize {
                per[classes[gi] as usize][0] += 1;
            }
        }
        i = j;
    }
    let total: f64 = 100.0 * per.iter().map(|p| p[0]).sum::<usize>() as f64
        / per.iter().map(|p| p[1]).sum::<usize>() as f64;
    [
        total,
        100.0 * per[0][0] as f64 / per[0][1] as f64,
        100.0 * per[1][0] as f64 / per[1][1] as f64,
        100.0 * per[2][0] as f64 / per[2][1] as f64,
    ]
}

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let epochs: usize = a.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let subset: usize = a.get(2).map(|s| s.parse().unwrap()).unwrap_or(2048);
    let lr_dis: f64 = a.get(3).map(|s| s.parse().unwrap()).unwrap_or(2e-4);
    let lambda: f64 = a.get(4).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let n_train = 9000;
    let n_test = 1500;
    let per = n_train + n_test + n_train / 8 + 64;
    let t0 = Instant::now();
    let corpus = generate_corpus(2 * per, 1);
    let src = build(DomainId::A, &corpus[..per], 11, n_train, n_test);
    let tgt = build(DomainId::B, &corpus[per..], 12, n_train, n_test);

    let base_cfg = BaselineConfig { seed: 0, ..BaselineConfig::default() };
    let (mut baseline, _) = train_baseline(TaskKind::Digit3Class, &src.train.images, Some(&src.train.classes), None, &base_cfg).unwrap();
    let acc0 = evaluate(&mut baseline.net, TaskKind::Digit3Class, &tgt.test.images, Some(&tgt.test.classes), None, "B", "b").unwrap();
    println!("[{:.0}s] baseline no-DA on B: {:.1}%", t0.elapsed().as_secs_f64(), acc0.value);

    let cfg = TrainConfig {
        epochs,
        batch_size: 32,
        seed: 0,
        use_itn: true,
        stn: StnChoice::None,
        lr_dis,
        lambda,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    let idx: Vec<usize> = (0..subset).collect();
    let s_img = gather_rows(&src.train.images, &idx);
    let s_cls: Vec<u8> = src.train.classes[..subset].to_vec();
    let t_img = gather_rows(&tgt.train.images, &idx);
    let data = FitData::classification(&s_img, &s_cls, &t_img);
    let outcome = fit(&cfg, 2, false, Some(TaskKind::Digit3Class), &data, None).unwrap();
    let e = outcome.record.epochs.last().unwrap();
    println!(
        "[{:.0}s] fit done: dis {:.3} adv {:.3} idt {:.4} task {:?}",
        t0.elapsed().as_secs_f64(), e.l_dis, e.l_adv, e.l_idt, e.l_task
    );

    let mut trainer = outcome.trainer;
    // concurrent task model
    if let Trainer::Uni(t) = &mut trainer {
        if let Some(task) = &mut t.task {
            let acc = class_acc(&mut task.net, &tgt.test.images, &tgt.test.classes);
            println!("concurrent task on B: total {:.1}% [h {:.0} f {:.0} s {:.0}]", acc[0], acc[1], acc[2], acc[3]);
        }
    }
    let istn_model = match &mut trainer { Trainer::Uni(t) => &mut t.unit.istn, Trainer::Bi(t) => &mut t.fwd };

    // diagnostics on eval-mode and train-mode transfers
    let probe: Vec<usize> = (0..256).collect();
    let s_probe = gather_rows(&src.train.images, &probe);
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let rng: &mut rand_chacha::ChaCha8Rng = &mut rng;
    let s2t_eval = istn_model.forward(&s_probe, false, rng).unwrap();
    let s2t_train = istn_model.forward(&s_probe, true, rng).unwrap();
    for (name, batch) in [("eval", &s2t_eval), ("train", &s2t_train)] {
        let mut th = Vec::new();
        let mut comp_frac = [0usize; 2];
        for i in 0..256 {
            let g = to_grid(batch.sample(i));
            if let Ok(m) = measure_thickness(&g) {
                th.push(m);
            }
            if src.train.classes[i] == 1 {
                comp_frac[1] += 1;
                if components(&g) >= 2 {
                    comp_frac[0] += 1;
                }
            }
        }
        let mean_th = th.iter().sum::<f64>() / th.len().max(1) as f64;
        println!(
            "s2t[{name}]: mean thickness {:.2} (target 5.0) | fractured split {} of {}",
            mean_th, comp_frac[0], comp_frac[1]
        );
    }
    // target-domain reference for the fracture statistic
    let mut tgt_split = [0usize; 2];
    for i in 0..512 {
        if tgt.train.classes[i] == 1 {
            tgt_split[1] += 1;
            if components(&to_grid(tgt.train.images.sample(i))) >= 2 {
                tgt_split[0] += 1;
            }
        }
    }
    println!("target B fractured split: {} of {}", tgt_split[0], tgt_split[1]);

    // post-hoc scratch on eval-mode transfers
    let task_cfg = BaselineConfig { max_epochs: 12, patience: 5, seed: 0, ..BaselineConfig::default() };
    let (mut scratch, _) = adapt_task(&mut baseline, istn_model, &src.train.images, Some(&src.train.classes), None, AdaptMode::Scratch, &task_cfg).unwrap();
    let acc = class_acc(&mut scratch.net, &tgt.test.images, &tgt.test.classes);
    println!(
        "[{:.0}s] post-hoc scratch (eval transfer): total {:.1}% [h {:.0} f {:.0} s {:.0}]",
        t0.elapsed().as_secs_f64(), acc[0], acc[1], acc[2], acc[3]
    );

    // post-hoc scratch on train-mode transfers
    let mut s2t_full = Tensor::<f32>::zeros(src.train.images.shape());
    let n = src.train.images.shape()[0];
    let mut i = 0;
    while i < n {
        let j = (i + 64).min(n);
        let idx: Vec<usize> = (i..j).collect();
        let out = istn_model.forward(&gather_rows(&src.train.images, &idx), true, rng).unwrap();
        for (b, &gi) in idx.iter().enumerate() {
            s2t_full.sample_mut(gi).copy_from_slice(out.sample(b));
        }
        i = j;
    }
    let (mut scratch2, _) = istn::eval::train_task(TaskKind::Digit3Class, &s2t_full, Some(&src.train.classes), None, &task_cfg, None).unwrap();
    let acc2 = class_acc(&mut scratch2.net, &tgt.test.images, &tgt.test.classes);
    println!(
        "[{:.0}s] post-hoc scratch (train transfer): total {:.1}% [h {:.0} f {:.0} s {:.0}]",
        t0.elapsed().as_secs_f64(), acc2[0], acc2[1], acc2[2], acc2[3]
    );
    let _ = TaskTarget::Classes(&[]);
}
