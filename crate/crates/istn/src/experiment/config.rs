use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::BaselineConfig;
use crate::models::StnChoice;
use crate::synth::DomainId;
use crate::train::TrainConfig;

/// Sizes and seeds of the synthetic domains an experiment builds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub n_train: usize,
    pub n_test: usize,
    pub corpus_seed: u64,
    pub data_seed: u64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            n_train: 9000,
            n_test: 1500,
            corpus_seed: 1,
            data_seed: 1,
        }
    }
}

/// One ISTN composition to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub use_itn: bool,
    pub stn: StnChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_spacing: Option<usize>,
}

impl VariantSpec {
    pub fn label(&self) -> String {
        let itn = if self.use_itn { "itn" } else { "noitn" };
        match (self.stn, self.cp_spacing) {
            (StnChoice::None, _) => format!("{itn}_nostn"),
            (StnChoice::Affine, _) => format!("{itn}_affine"),
            (StnChoice::Bspline, Some(s)) => format!("{itn}_bspline{s}"),
            (StnChoice::Bspline, None) => format!("{itn}_bspline"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_itn && self.stn == StnChoice::None {
            return Err(Error::Config("variant has neither itn nor stn".into()));
        }
        if self.stn == StnChoice::Bspline && self.cp_spacing.is_none() {
            return Err(Error::Config("b-spline variant needs cp_spacing".into()));
        }
        Ok(())
    }
}

/// Hyper-parameter axes for grid search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub lr: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Only consulted for b-spline variants.
    #[serde(default)]
    pub cp_spacing: Vec<usize>,
}

impl GridAxes {
    pub fn validate(&self, needs_spacing: bool) -> Result<()> {
        if self.lr.is_empty() || self.lambda.is_empty() {
            return Err(Error::Config("grid axes must be nonempty".into()));
        }
        if needs_spacing && self.cp_spacing.is_empty() {
            return Err(Error::Config(
                "b-spline grid search needs a cp_spacing axis".into(),
            ));
        }
        Ok(())
    }
}

/// Declarative description of a full experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: DomainId,
    pub targets: Vec<DomainId>,
    #[serde(default)]
    pub dataset: DatasetParams,
    #[serde(default)]
    pub baseline: BaselineConfig,
    /// Template adversarial config; variant fields and per-seed seeds are
    /// overridden per run.
    pub adapt: TrainConfig,
    /// Retraining config for the adapted task models.
    #[serde(default)]
    pub adapt_task: BaselineConfig,
    pub variants: Vec<VariantSpec>,
    pub seeds: Vec<u64>,
    /// Also produce finetuned task models.
    #[serde(default)]
    pub finetune: bool,
    /// Cap on the number of train images fed to the adversarial loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapt_train_subset: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Config("experiment needs at least one target".into()));
        }
        if self.targets.contains(&self.source) {
            return Err(Error::Config("source cannot be one of the targets".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("experiment needs at least one seed".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("experiment needs at least one variant".into()));
        }
        for v in &self.variants {
            v.validate()?;
        }
        self.adapt.validate_template()
    }
}

impl TrainConfig {
    /// Validation that skips the variant-dependent fields an experiment
    /// overrides per run.
    pub fn validate_template(&self) -> Result<()> {
        let mut probe = self.clone();
        probe.use_itn = true;
        probe.stn = StnChoice::None;
        probe.cp_spacing = None;
        probe.validate()
    }

    /// Concrete config for one (variant, seed) run.
    pub fn for_variant(&self, variant: &VariantSpec, seed: u64) -> TrainConfig {
        let mut cfg = self.clone();
        cfg.use_itn = variant.use_itn;
        cfg.stn = variant.stn;
        cfg.cp_spacing = variant.cp_spacing;
        cfg.seed = seed;
        cfg
    }
}
