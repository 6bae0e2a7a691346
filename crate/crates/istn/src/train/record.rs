use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

use super::config::TrainConfig;
use super::losses::LossBundle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_dis: f64,
    pub l_adv: f64,
    pub l_idt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_cyc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_task: Option<f64>,
    pub wall_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { stage: String },
}

/// Persistent description of one run: config + seed + per-epoch losses +
/// final metrics, enough to reproduce or resume it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: TrainConfig,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub status: RunStatus,
    pub final_metrics: BTreeMap<String, f64>,
    pub wall_s: f64,
    pub code_version: String,
}

impl ExperimentRecord {
    pub fn new(config: TrainConfig) -> Self {
        let seed = config.seed;
        Self {
            config,
            seed,
            epochs: Vec::new(),
            status: RunStatus::Completed,
            final_metrics: BTreeMap::new(),
            wall_s: 0.0,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn push_epoch(&mut self, epoch: usize, mean: LossBundle, l_task: Option<f64>, wall_s: f64) {
        self.epochs.push(EpochRecord {
            epoch,
            l_dis: mean.l_dis,
            l_adv: mean.l_adv,
            l_idt: mean.l_idt,
            l_cyc: mean.l_cyc,
            l_task,
            wall_s,
        });
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Loss curves as flat vectors (used by determinism checks).
    pub fn loss_curves(&self) -> Vec<(String, Vec<f64>)> {
        vec![
            ("l_dis".into(), self.epochs.iter().map(|e| e.l_dis).collect()),
            ("l_adv".into(), self.epochs.iter().map(|e| e.l_adv).collect()),
            ("l_idt".into(), self.epochs.iter().map(|e| e.l_idt).collect()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_json_round_trip() {
        let mut r = ExperimentRecord::new(TrainConfig::default());
        r.push_epoch(
            0,
            LossBundle {
                l_dis: 0.5,
                l_adv: 0.7,
                l_idt: 0.1,
                l_cyc: None,
                lambda: 1.0,
            },
            Some(1.1),
            2.5,
        );
        r.final_metrics.insert("acc".into(), 91.0);
        let dir = std::env::temp_dir().join("istn_record_test");
        let p = dir.join("record.json");
        r.save(&p).unwrap();
        let back = ExperimentRecord::load(&p).unwrap();
        assert_eq!(r, back);
    }
}
