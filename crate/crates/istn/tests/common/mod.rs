//! Shared fixtures for the integration and acceptance suites: the four
//! synthetic domains and the source baseline are built once per test binary.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use istn::eval::{evaluate, train_baseline, BaselineConfig};
use istn::models::TaskKind;
use istn::synth::{build_domain, generate_corpus, DomainDataset, DomainId, DomainSpec};
use istn::tensor::Tensor;
use istn::train::TaskTrainer;

pub const N_TRAIN: usize = 9000;
pub const N_TEST: usize = 1500;
pub const CORPUS_SEED: u64 = 1;

/// Domains at acceptance scale, built once.
pub fn domains() -> &'static BTreeMap<DomainId, DomainDataset> {
    static DOMAINS: OnceLock<BTreeMap<DomainId, DomainDataset>> = OnceLock::new();
    DOMAINS.get_or_init(|| {
        let ids = [DomainId::A, DomainId::B, DomainId::C, DomainId::D];
        let per = N_TRAIN + N_TEST + N_TRAIN / 8 + 64;
        let corpus = generate_corpus(ids.len() * per, CORPUS_SEED);
        ids.iter()
            .enumerate()
            .map(|(k, &id)| {
                let spec = DomainSpec {
                    seed: 100 + k as u64,
                    ..DomainSpec::standard(id, 0)
                }
                .with_sizes(N_TRAIN, N_TEST);
                let ds = build_domain(&spec, &corpus[k * per..(k + 1) * per]).unwrap();
                (id, ds)
            })
            .collect()
    })
}

pub struct BaselineFixture {
    pub task: Mutex<TaskTrainer<f32>>,
    pub in_domain: f64,
    pub no_da: BTreeMap<DomainId, f64>,
    pub epochs_run: usize,
    pub wall_s: f64,
}

/// Source baseline trained on domain A (<= 30 epochs), with its in-domain and
/// no-DA target accuracies.
pub fn baseline() -> &'static BaselineFixture {
    static BASELINE: OnceLock<BaselineFixture> = OnceLock::new();
    BASELINE.get_or_init(|| {
        let t0 = std::time::Instant::now();
        let ds = domains();
        let src = &ds[&DomainId::A];
        let cfg = BaselineConfig {
            max_epochs: 30,
            seed: 0,
            ..BaselineConfig::default()
        };
        let (mut task, rep) = train_baseline(
            TaskKind::Digit3Class,
            &src.train.images,
            Some(&src.train.classes),
            None,
            &cfg,
        )
        .unwrap();
        let in_domain = evaluate(
            &mut task.net,
            TaskKind::Digit3Class,
            &src.test.images,
            Some(&src.test.classes),
            None,
            "A",
            "baseline",
        )
        .unwrap()
        .value;
        let mut no_da = BTreeMap::new();
        for id in [DomainId::B, DomainId::C, DomainId::D] {
            let t = &ds[&id];
            let acc = evaluate(
                &mut task.net,
                TaskKind::Digit3Class,
                &t.test.images,
                Some(&t.test.classes),
                None,
                &id.to_string(),
                "baseline",
            )
            .unwrap()
            .value;
            no_da.insert(id, acc);
        }
        BaselineFixture {
            task: Mutex::new(task),
            in_domain,
            no_da,
            epochs_run: rep.epochs_run,
            wall_s: t0.elapsed().as_secs_f64(),
        }
    })
}

/// First `n` rows of a split as (images, classes).
pub fn head(ds: &DomainDataset, n: usize) -> (Tensor<f32>, Vec<u8>) {
    let n = n.min(ds.train.len());
    let idx: Vec<usize> = (0..n).collect();
    (
        istn::train::gather_rows(&ds.train.images, &idx),
        ds.train.classes[..n].to_vec(),
    )
}
