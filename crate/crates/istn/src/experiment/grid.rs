//! Hyper-parameter grid search ranked without target labels: the proxy score
//! combines discriminator confusion on transferred source-validation images
//! with the identity loss on target-validation images (both label-free).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;
use crate::models::StnChoice;
use crate::tensor::Tensor;
use crate::train::{fit, FitData, TrainConfig, Trainer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lr: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_spacing: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridEntry {
    pub point: GridPoint,
    pub proxy_score: f64,
    pub config_hash: u64,
    pub run_dir: PathBuf,
    pub completed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridOutcome {
    /// All executed points, in execution order.
    pub entries: Vec<GridEntry>,
    /// Indices into `entries`, best proxy first (ties broken by config hash).
    pub ranking: Vec<usize>,
    /// True when a budget cap stopped the sweep before the full product.
    pub partial: bool,
}

/// FNV-1a over the serialized config: the deterministic ranking tie-breaker.
pub fn config_hash(cfg: &TrainConfig) -> u64 {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Label-free proxy: `|0.5 - mean D(S2T_val)| + mean |ISTN(T_val) - T_val|`.
/// Lower is better (a confused discriminator and a respected identity).
pub fn proxy_score(
    trainer: &mut Trainer<f32>,
    source_val: &Tensor<f32>,
    target_val: &Tensor<f32>,
) -> Result<f64> {
    let mut rng: rand_chacha::ChaCha8Rng = rand::SeedableRng::seed_from_u64(0);
    let (istn, dis) = match trainer {
        Trainer::Uni(t) => (&mut t.unit.istn, &mut t.unit.dis),
        Trainer::Bi(t) => (&mut t.fwd, &mut t.dis_t),
    };
    let s2t = istn.forward(source_val, false, &mut rng)?;
    let d = dis.forward(&s2t, false, &mut rng);
    let mean_d: f64 =
        d.data().iter().map(|&v| v as f64).sum::<f64>() / d.numel().max(1) as f64;
    let t2t = istn.forward(target_val, false, &mut rng)?;
    let idt = t2t.mean_abs_diff(target_val);
    Ok((0.5 - mean_d).abs() + idt)
}

/// Cartesian product of the axes; `cp_spacing` participates only for
/// b-spline configs.
pub fn grid_points(base: &TrainConfig, axes: &super::GridAxes) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &lr in &axes.lr {
        for &lambda in &axes.lambda {
            if base.stn == StnChoice::Bspline {
                for &sp in &axes.cp_spacing {
                    out.push(GridPoint {
                        lr,
                        lambda,
                        cp_spacing: Some(sp),
                    });
                }
            } else {
                out.push(GridPoint {
                    lr,
                    lambda,
                    cp_spacing: None,
                });
            }
        }
    }
    out
}

/// Executes the sweep (optionally budget-capped), persisting each point's
/// record under `out/grid/p<k>` and the ranked matrix in `out/grid.json`.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    base: &TrainConfig,
    axes: &super::GridAxes,
    source_train: &Tensor<f32>,
    source_classes: &[u8],
    target_train: &Tensor<f32>,
    source_val: &Tensor<f32>,
    target_val: &Tensor<f32>,
    out: &Path,
    budget: Option<usize>,
) -> Result<GridOutcome> {
    axes.validate(base.stn == StnChoice::Bspline)?;
    let points = grid_points(base, axes);
    let mut entries = Vec::new();
    let mut partial = false;
    for (k, point) in points.iter().enumerate() {
        if let Some(b) = budget {
            if k >= b {
                partial = true;
                break;
            }
        }
        let mut cfg = base.clone();
        cfg.lr_istn = point.lr;
        cfg.lr_dis = point.lr;
        cfg.lambda = point.lambda;
        if let Some(sp) = point.cp_spacing {
            cfg.cp_spacing = Some(sp);
        }
        let dir = out.join("grid").join(format!("p{k}"));
        let data = FitData::classification(source_train, source_classes, target_train);
        let outcome = fit(&cfg, 2, false, None, &data, Some(&dir))?;
        outcome.record.save(&dir.join("record.json"))?;
        let mut trainer = outcome.trainer;
        let score = proxy_score(&mut trainer, source_val, target_val)?;
        entries.push(GridEntry {
            point: *point,
            proxy_score: score,
            config_hash: config_hash(&cfg),
            run_dir: dir,
            completed: matches!(outcome.record.status, crate::train::RunStatus::Completed),
        });
    }
    let mut ranking: Vec<usize> = (0..entries.len()).collect();
    ranking.sort_by(|&a, &b| {
        entries[a]
            .proxy_score
            .partial_cmp(&entries[b].proxy_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(entries[a].config_hash.cmp(&entries[b].config_hash))
    });
    let outcome = GridOutcome {
        entries,
        ranking,
        partial,
    };
    io::write_json(&out.join("grid.json"), &outcome)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_config_sensitive() {
        let a = TrainConfig::default();
        let mut b = TrainConfig::default();
        b.lambda = 2.0;
        assert_eq!(config_hash(&a), config_hash(&a));
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn cartesian_product_counts() {
        let base = TrainConfig::default();
        let axes = super::super::GridAxes {
            lr: vec![1e-4, 2e-4],
            lambda: vec![0.1, 1.0],
            cp_spacing: vec![],
        };
        assert_eq!(grid_points(&base, &axes).len(), 4);
        let bspline = TrainConfig {
            stn: StnChoice::Bspline,
            cp_spacing: Some(8),
            use_itn: false,
            ..TrainConfig::default()
        };
        let axes2 = super::super::GridAxes {
            lr: vec![1e-4],
            lambda: vec![1.0],
            cp_spacing: vec![4, 8],
        };
        assert_eq!(grid_points(&bspline, &axes2).len(), 2);
    }

    #[test]
    fn ranking_breaks_ties_by_hash() {
        let mk = |hash: u64| GridEntry {
            point: GridPoint {
                lr: 1e-4,
                lambda: 1.0,
                cp_spacing: None,
            },
            proxy_score: 0.5,
            config_hash: hash,
            run_dir: PathBuf::from("x"),
            completed: true,
        };
        let entries = vec![mk(9), mk(3), mk(7)];
        let mut ranking: Vec<usize> = (0..entries.len()).collect();
        ranking.sort_by(|&a, &b| {
            entries[a]
                .proxy_score
                .partial_cmp(&entries[b].proxy_score)
                .unwrap()
                .then(entries[a].config_hash.cmp(&entries[b].config_hash))
        });
        assert_eq!(ranking, vec![1, 2, 0]);
    }
}
