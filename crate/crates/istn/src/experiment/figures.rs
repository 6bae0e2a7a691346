//! Figure emission from run checkpoints: difference images, deformation
//! fields (arrow plot + deformed grid), and source/transferred/target sample
//! grids.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::load_dataset;
use crate::tensor::Tensor;
use crate::train::gather_rows;
use crate::viz;

use super::run::load_istn_checkpoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    DifferenceImage,
    DeformationField,
    SampleGrid,
}

impl std::str::FromStr for FigureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference" | "difference_image" => Ok(FigureKind::DifferenceImage),
            "field" | "deformation_field" => Ok(FigureKind::DeformationField),
            "samples" | "sample_grid" => Ok(FigureKind::SampleGrid),
            other => Err(Error::Config(format!("unknown figure kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FigureRequest {
    pub kind: FigureKind,
    /// Checkpoint base path (a trainer checkpoint, e.g. `.../ckpt_final`).
    pub checkpoint: PathBuf,
    /// Source dataset directory; samples are taken from its test split.
    pub source_dataset: PathBuf,
    /// Target dataset directory (sample grids only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_dataset: Option<PathBuf>,
    pub samples: Vec<usize>,
    pub out_dir: PathBuf,
    #[serde(default = "default_upscale")]
    pub upscale: usize,
}

fn default_upscale() -> usize {
    8
}

/// Renders the requested figures; returns the written files.
pub fn render_figures(req: &FigureRequest) -> Result<Vec<PathBuf>> {
    if !req.checkpoint.with_extension("json").exists() {
        return Err(Error::Dependency(format!(
            "checkpoint {} not found",
            req.checkpoint.display()
        )));
    }
    let (mut istn, _cfg) = load_istn_checkpoint(&req.checkpoint)?;
    let source = load_dataset(&req.source_dataset)?;
    if req.samples.is_empty() {
        return Err(Error::Param("figure request needs sample indices".into()));
    }
    for &i in &req.samples {
        if i >= source.test.len() {
            return Err(Error::Size(format!(
                "sample {i} outside source test split of {}",
                source.test.len()
            )));
        }
    }
    let (h, w) = (28usize, 28usize);
    std::fs::create_dir_all(&req.out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = gather_rows(&source.test.images, &req.samples);
    let full = istn.forward(&batch, false, &mut rng)?;
    let itn_out: Tensor<f32> = istn
        .last_itn_output()
        .cloned()
        .unwrap_or_else(|| batch.clone());
    let mut written = Vec::new();
    match req.kind {
        FigureKind::DifferenceImage => {
            for (b, &i) in req.samples.iter().enumerate() {
                // appearance change: ITN output minus input
                let diff_itn: Vec<f32> = itn_out
                    .sample(b)
                    .iter()
                    .zip(batch.sample(b).iter())
                    .map(|(a, x)| a - x)
                    .collect();
                let p = req.out_dir.join(format!("sample{i}_itn_diff.png"));
                viz::render_difference(&diff_itn, h, w, req.upscale).save(&p)?;
                written.push(p);
                // geometric change: warped output minus ITN output
                let diff_stn: Vec<f32> = full
                    .sample(b)
                    .iter()
                    .zip(itn_out.sample(b).iter())
                    .map(|(a, x)| a - x)
                    .collect();
                let p = req.out_dir.join(format!("sample{i}_stn_diff.png"));
                viz::render_difference(&diff_stn, h, w, req.upscale).save(&p)?;
                written.push(p);
            }
        }
        FigureKind::DeformationField => {
            let stn = istn
                .stn
                .as_ref()
                .ok_or_else(|| Error::Dependency("checkpoint has no spatial transformer".into()))?;
            let fields = stn.last_fields()?;
            for (b, &i) in req.samples.iter().enumerate() {
                let field = &fields[b];
                let p = req.out_dir.join(format!("sample{i}_quiver.png"));
                viz::render_quiver(itn_out.sample(b), field, req.upscale).save(&p)?;
                written.push(p);
                let p = req.out_dir.join(format!("sample{i}_grid.png"));
                viz::render_grid_overlay(field, req.upscale, 2).save(&p)?;
                written.push(p);
            }
        }
        FigureKind::SampleGrid => {
            let target_dir = req
                .target_dataset
                .as_ref()
                .ok_or_else(|| Error::Dependency("sample grid needs a target dataset".into()))?;
            let target = load_dataset(target_dir)?;
            let mut rows = Vec::new();
            for (b, &i) in req.samples.iter().enumerate() {
                let t_idx = i % target.test.len();
                rows.push(vec![
                    batch.sample(b),
                    full.sample(b),
                    target.test.images.sample(t_idx),
                ]);
            }
            let canvas = viz::render_tile_grid(&rows, h, w, req.upscale)?;
            let p = req.out_dir.join("samples.png");
            canvas.save(&p)?;
            written.push(p);
        }
    }
    Ok(written)
}
