use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::StnChoice;

use super::label::SoftLabelPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Uni,
    Bi,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni" => Ok(Direction::Uni),
            "bi" => Ok(Direction::Bi),
            other => Err(Error::Config(format!("unknown direction '{other}'"))),
        }
    }
}

/// Hyper-parameters of one adversarial adaptation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_istn: f64,
    pub lr_dis: f64,
    pub lr_task: f64,
    pub lambda: f64,
    /// Cycle weight for bidirectional training; `None` follows `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cycle: Option<f64>,
    pub adam_betas: (f64, f64),
    pub seed: u64,
    pub direction: Direction,
    pub use_itn: bool,
    pub stn: StnChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_spacing: Option<usize>,
    #[serde(default = "SoftLabelPolicy::default")]
    pub soft_labels: SoftLabelPolicy,
    /// Emit a checkpoint every this many epochs (0 disables periodic ones).
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Abort when any loss component exceeds this.
    #[serde(default = "default_divergence")]
    pub divergence_threshold: f64,
}

fn default_divergence() -> f64 {
    1e4
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            lr_istn: 2e-4,
            lr_dis: 2e-4,
            lr_task: 1e-4,
            lambda: 1.0,
            lambda_cycle: None,
            adam_betas: (0.5, 0.999),
            seed: 0,
            direction: Direction::Uni,
            use_itn: true,
            stn: StnChoice::None,
            cp_spacing: None,
            soft_labels: SoftLabelPolicy::default(),
            checkpoint_every: 25,
            divergence_threshold: default_divergence(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Param("batch size must be positive".into()));
        }
        if self.lr_istn <= 0.0 || self.lr_dis <= 0.0 || self.lr_task <= 0.0 {
            return Err(Error::Param("learning rates must be positive".into()));
        }
        if self.lambda < 0.0 || self.lambda_cycle.is_some_and(|l| l < 0.0) {
            return Err(Error::Param("lambda must be nonnegative".into()));
        }
        if !self.use_itn && self.stn == StnChoice::None {
            return Err(Error::Config(
                "an ISTN needs at least one of the itn and stn components".into(),
            ));
        }
        if self.stn == StnChoice::Bspline && self.cp_spacing.is_none() {
            return Err(Error::Config(
                "b-spline stn requires a control-point spacing".into(),
            ));
        }
        self.soft_labels.validate()
    }

    pub fn cycle_weight(&self) -> f64 {
        self.lambda_cycle.unwrap_or(self.lambda)
    }
}
