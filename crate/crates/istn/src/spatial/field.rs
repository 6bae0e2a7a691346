use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::grid::{identity_grid, SamplingGrid};

/// Per-voxel displacement vectors in normalized coordinates, same spatial
/// shape as the target image. Layout matches [`SamplingGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDisplacementField<T> {
    pub spatial: Vec<usize>,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> DenseDisplacementField<T> {
    pub fn zeros(spatial: &[usize]) -> Self {
        let dim = spatial.len();
        let voxels: usize = spatial.iter().product();
        Self {
            spatial: spatial.to_vec(),
            dim,
            data: vec![T::zero(); voxels * dim],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Exports as flat binary + JSON header, shape `[spatial.., dim]`.
    pub fn save(&self, base: &Path) -> Result<()> {
        let mut shape = self.spatial.clone();
        shape.push(self.dim);
        let t = Tensor::from_vec(&shape, self.data.clone())?;
        io::save_tensor(base, &t)
    }

    pub fn load(base: &Path) -> Result<Self> {
        let t = io::load_tensor::<T>(base)?;
        let shape = t.shape().to_vec();
        if shape.len() < 2 {
            return Err(Error::Shape("field file needs rank >= 2".into()));
        }
        let dim = shape[shape.len() - 1];
        let spatial = shape[..shape.len() - 1].to_vec();
        if spatial.len() != dim {
            return Err(Error::Shape(format!(
                "field shape {:?} does not end with its own rank",
                shape
            )));
        }
        Ok(Self {
            spatial,
            dim,
            data: t.into_data(),
        })
    }
}

/// `grid(v) = identity(v) + field(v)`.
pub fn compose_displacement<T: Scalar>(field: &DenseDisplacementField<T>) -> Result<SamplingGrid<T>> {
    if !field.is_finite() {
        return Err(Error::Numeric("displacement field must be finite".into()));
    }
    let mut grid = identity_grid::<T>(&field.spatial);
    for (g, f) in grid.data.iter_mut().zip(field.data.iter()) {
        *g += *f;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_composes_to_identity() {
        let f = DenseDisplacementField::<f64>::zeros(&[6, 7]);
        let g = compose_displacement(&f).unwrap();
        assert_eq!(g.max_abs_diff(&identity_grid(&[6, 7])), 0.0);
    }

    #[test]
    fn uniform_field_shifts_identity_pointwise() {
        let mut f = DenseDisplacementField::<f64>::zeros(&[4, 5]);
        for v in 0..f.data.len() / 2 {
            f.data[v * 2] = 0.25;
            f.data[v * 2 + 1] = -0.5;
        }
        let g = compose_displacement(&f).unwrap();
        let id = identity_grid::<f64>(&[4, 5]);
        for v in 0..g.voxels() {
            assert_eq!(g.data[v * 2], id.data[v * 2] + 0.25);
            assert_eq!(g.data[v * 2 + 1], id.data[v * 2 + 1] - 0.5);
        }
    }
}
