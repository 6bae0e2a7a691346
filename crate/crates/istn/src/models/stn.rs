use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Linear, Network};
use crate::scalar::Scalar;
use crate::spatial::{
    affine_grid_backward, affine_to_grid, compose_displacement, cpgrid_to_dense,
    dense_to_cpgrid_grad, lattice_dims, resample_batch, resample_batch_backward, AffineParams,
    ControlPointGrid, DenseDisplacementField, SamplingGrid,
};
use crate::tensor::Tensor;

use super::tables::stn_trunk_spec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StnKind {
    Affine,
    Bspline,
}

/// Spatial transformer: a conv trunk regresses transform parameters (affine
/// entries as identity + delta, or B-spline control-point displacements from
/// a zero-initialized head), then warps its own input with the resulting
/// sampling grid. Zero head weights make it the exact identity at init.
pub struct Stn<T> {
    pub kind: StnKind,
    pub dim: usize,
    pub spacing: Option<usize>,
    pub spatial: Vec<usize>,
    pub trunk: Network<T>,
    pub head: Linear<T>,
    cache: Option<Cache<T>>,
}

struct Cache<T> {
    input: Tensor<T>,
    grids: Vec<SamplingGrid<T>>,
    cpgrids: Vec<ControlPointGrid<T>>,
    trunk_out_shape: Vec<usize>,
}

/// Per-sample transform regressed by the STN in the last forward.
pub enum StnTransform<T> {
    Affine(AffineParams<T>),
    Bspline(ControlPointGrid<T>),
}

pub(crate) fn affine_head_dim(dim: usize) -> usize {
    dim * (dim + 1)
}

impl<T: Scalar> Stn<T> {
    /// Builds the regressor: discriminator trunk (minus its sigmoid head)
    /// plus a zero-initialized linear head sized for the transform kind.
    pub fn build(
        kind: StnKind,
        dim: usize,
        spatial: &[usize],
        spacing: Option<usize>,
        slim: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("stn dim must be 2 or 3, got {dim}")));
        }
        let spacing = match (kind, spacing) {
            (StnKind::Affine, _) => None,
            (StnKind::Bspline, Some(s)) if s >= 2 => Some(s),
            (StnKind::Bspline, other) => {
                return Err(Error::Config(format!(
                    "b-spline stn needs a control-point spacing >= 2, got {other:?}"
                )))
            }
        };
        let mut trunk_spec = stn_trunk_spec(dim, slim);
        trunk_spec.input_shape = {
            let mut s = vec![1];
            s.extend_from_slice(spatial);
            s
        };
        let trunk = Network::build(trunk_spec, rng)?;
        let trunk_out: usize = trunk.spec.shape_trace()?.last().unwrap().iter().product();
        let head_dim = match kind {
            StnKind::Affine => affine_head_dim(dim),
            StnKind::Bspline => {
                let dims = lattice_dims(spatial, spacing.unwrap());
                dim * dims.iter().product::<usize>()
            }
        };
        let mut head = Linear::new(trunk_out, head_dim, rng);
        head.zero_params();
        Ok(Self {
            kind,
            dim,
            spacing,
            spatial: spatial.to_vec(),
            trunk,
            head,
            cache: None,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.head.f_out
    }

    /// Regresses per-sample transforms and warps the input.
    pub fn forward(&mut self, x: &Tensor<T>, train: bool, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        let n = x.shape()[0];
        let feats = self.trunk.forward(x, train, rng);
        let trunk_out_shape = feats.shape().to_vec();
        let flat = feats.clone().reshaped(&[n, feats.numel() / n])?;
        let params = self.head.forward(&flat);
        let mut grids = Vec::with_capacity(n);
        let mut cpgrids = Vec::new();
        for i in 0..n {
            let row = params.sample(i);
            match self.kind {
                StnKind::Affine => {
                    let identity = AffineParams::<T>::identity(self.dim).to_flat();
                    let flat_params: Vec<T> = identity
                        .iter()
                        .zip(row.iter())
                        .map(|(a, d)| *a + *d)
                        .collect();
                    let p = AffineParams::from_flat(self.dim, &flat_params)?;
                    grids.push(affine_to_grid(&p, &self.spatial)?);
                }
                StnKind::Bspline => {
                    let mut cp = ControlPointGrid::zeros(&self.spatial, self.spacing.unwrap())?;
                    cp.disp.copy_from_slice(row);
                    let dense = cpgrid_to_dense(&cp, &self.spatial)?;
                    grids.push(compose_displacement(&dense)?);
                    cpgrids.push(cp);
                }
            }
        }
        let warped = resample_batch(x, &grids)?;
        self.cache = Some(Cache {
            input: x.clone(),
            grids,
            cpgrids,
            trunk_out_shape,
        });
        Ok(warped)
    }

    /// Backward through warp, transform construction, head and trunk.
    /// Returns the gradient w.r.t. the STN input (sum of the resampling path
    /// and the regressor path).
    pub fn backward(&mut self, gout: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::Dependency("stn backward before forward".into()))?;
        let n = cache.input.shape()[0];
        let (mut dx, dgrids) = resample_batch_backward(&cache.input, &cache.grids, gout)?;
        let head_dim = self.head.f_out;
        let mut dparams = Tensor::zeros(&[n, head_dim]);
        for i in 0..n {
            match self.kind {
                StnKind::Affine => {
                    let g = affine_grid_backward(&dgrids[i], &self.spatial);
                    dparams
                        .sample_mut(i)
                        .copy_from_slice(&g.to_flat(self.dim));
                }
                StnKind::Bspline => {
                    let dd = dense_to_cpgrid_grad(&cache.cpgrids[i], &self.spatial, &dgrids[i])?;
                    dparams.sample_mut(i).copy_from_slice(&dd);
                }
            }
        }
        let dflat = self.head.backward(&dparams);
        let dfeats = dflat.reshaped(&cache.trunk_out_shape)?;
        let dx_trunk = self.trunk.backward(&dfeats);
        dx.add_scaled(&dx_trunk, T::one());
        Ok(dx)
    }

    /// Transforms regressed in the last forward (for inspection/figures).
    pub fn last_transforms(&self) -> Vec<StnTransform<T>>
    where
        T: Clone,
    {
        match &self.cache {
            None => Vec::new(),
            Some(c) => match self.kind {
                StnKind::Bspline => c
                    .cpgrids
                    .iter()
                    .map(|g| StnTransform::Bspline(g.clone()))
                    .collect(),
                StnKind::Affine => Vec::new(),
            },
        }
    }

    /// Dense displacement fields realized in the last forward.
    pub fn last_fields(&self) -> Result<Vec<DenseDisplacementField<T>>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Dependency("no stn forward recorded".into()))?;
        let id = crate::spatial::identity_grid::<T>(&self.spatial);
        Ok(cache
            .grids
            .iter()
            .map(|g| DenseDisplacementField {
                spatial: self.spatial.clone(),
                dim: self.dim,
                data: g
                    .data
                    .iter()
                    .zip(id.data.iter())
                    .map(|(a, b)| *a - *b)
                    .collect(),
            })
            .collect())
    }

    pub fn zero_grad(&mut self) {
        self.trunk.zero_grad();
        self.head.zero_grad();
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(String, &mut Vec<T>, &mut Vec<T>)) {
        self.trunk
            .visit_params(&mut |name, p, g| f(format!("trunk.{name}"), p, g));
        f("head.w".into(), &mut self.head.w, &mut self.head.gw);
        f("head.b".into(), &mut self.head.b, &mut self.head.gb);
    }

    pub fn visit_state(&mut self, f: &mut dyn FnMut(String, &mut Vec<T>)) {
        self.trunk
            .visit_state(&mut |name, s| f(format!("trunk.{name}"), s));
    }
}
