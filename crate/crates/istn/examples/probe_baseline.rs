use std::time::Instant;

use istn::eval::{evaluate, train_baseline, BaselineConfig};
use istn::models::TaskKind;
use istn::synth::{build_domain, generate_corpus, DomainId, DomainSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_train: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(4000);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3e-4);
    let beta1: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.9);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(20);
    let n_test = 800;
    let per = n_train + n_test + 600;
    let corpus = generate_corpus(2 * per, 1);
    let a = build_domain(
        &DomainSpec { seed: 11, ..DomainSpec::standard(DomainId::A, 0) }.with_sizes(n_train, n_test),
        &corpus[..per],
    )
    .unwrap();
    let b = build_domain(
        &DomainSpec { seed: 12, ..DomainSpec::standard(DomainId::B, 0) }.with_sizes(n_train, n_test),
        &corpus[per..],
    )
    .unwrap();
    let cfg = BaselineConfig {
        max_epochs: epochs,
        lr,
        adam_betas: (beta1, 0.999),
        seed: 0,
        patience: 10,
        ..BaselineConfig::default()
    };
    let t = Instant::now();
    let (mut task, rep) =
        train_baseline(TaskKind::Digit3Class, &a.train.images, Some(&a.train.classes), None, &cfg).unwrap();
    let acc_a = evaluate(&mut task.net, TaskKind::Digit3Class, &a.test.images, Some(&a.test.classes), None, "A", "b").unwrap();
    let acc_b = evaluate(&mut task.net, TaskKind::Digit3Class, &b.test.images, Some(&b.test.classes), None, "B", "b").unwrap();
    // per-class accuracy on A
    let mut per_class = [[0usize; 2]; 3];
    {
        let mut rng = rand::SeedableRng::seed_from_u64(0);
        let rng: &mut rand_chacha::ChaCha8Rng = &mut rng;
        let out = task.net.forward(&a.test.images, false, rng);
        let per = out.numel() / out.shape()[0];
        for i in 0..a.test.len() {
            let row = &out.data()[i * per..(i + 1) * per];
            let mut best = 0;
            for k in 1..3 {
                if row[k] > row[best] {
                    best = k;
                }
            }
            let cls = a.test.classes[i] as usize;
            per_class[cls][1] += 1;
            if best == cls {
                per_class[cls][0] += 1;
            }
        }
    }
    println!(
        "n={n_train} lr={lr} b1={beta1} epochs={}/{} best={} took {:.0}s: A {:.1}% B {:.1}% | healthy {}/{} fractured {}/{} swollen {}/{}",
        rep.epochs_run, epochs, rep.best_epoch, t.elapsed().as_secs_f64(),
        acc_a.value, acc_b.value,
        per_class[0][0], per_class[0][1], per_class[1][0], per_class[1][1], per_class[2][0], per_class[2][1],
    );
}
