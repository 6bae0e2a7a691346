use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::grid::{identity_grid, SamplingGrid};

/// Linear spatial transform in normalized coordinates: `x' = M x + t`.
///
/// `matrix` is row-major `dim × dim`; `translation` has `dim` entries. The
/// identity element is `M = I, t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineParams<T> {
    pub dim: usize,
    pub matrix: Vec<T>,
    pub translation: Vec<T>,
}

impl<T: Scalar> AffineParams<T> {
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![T::zero(); dim * dim];
        for a in 0..dim {
            matrix[a * dim + a] = T::one();
        }
        Self {
            dim,
            matrix,
            translation: vec![T::zero(); dim],
        }
    }

    /// Flat layout used by STN regressor heads: per output axis, the matrix
    /// row followed by the translation entry (`dim * (dim + 1)` values).
    pub fn from_flat(dim: usize, flat: &[T]) -> Result<Self> {
        if flat.len() != dim * (dim + 1) {
            return Err(Error::Shape(format!(
                "affine flat layout for dim {} needs {} values, got {}",
                dim,
                dim * (dim + 1),
                flat.len()
            )));
        }
        let mut matrix = vec![T::zero(); dim * dim];
        let mut translation = vec![T::zero(); dim];
        for a in 0..dim {
            for b in 0..dim {
                matrix[a * dim + b] = flat[a * (dim + 1) + b];
            }
            translation[a] = flat[a * (dim + 1) + dim];
        }
        Ok(Self {
            dim,
            matrix,
            translation,
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        let d = self.dim;
        let mut flat = vec![T::zero(); d * (d + 1)];
        for a in 0..d {
            for b in 0..d {
                flat[a * (d + 1) + b] = self.matrix[a * d + b];
            }
            flat[a * (d + 1) + d] = self.translation[a];
        }
        flat
    }

    pub fn det(&self) -> f64 {
        let m: Vec<f64> = self.matrix.iter().map(|v| v.as_f64()).collect();
        match self.dim {
            2 => m[0] * m[3] - m[1] * m[2],
            3 => {
                m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                    + m[2] * (m[3] * m[7] - m[4] * m[6])
            }
            _ => f64::NAN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Shape(format!("affine dim must be 2 or 3, got {}", self.dim)));
        }
        if !self.matrix.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::Numeric("affine parameters must be finite".into()));
        }
        if self.det().abs() <= 1e-6 {
            return Err(Error::Numeric(format!(
                "degenerate affine matrix, |det| = {:.3e}",
                self.det().abs()
            )));
        }
        Ok(())
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let d = self.dim;
        debug_assert_eq!(d, other.dim);
        let mut matrix = vec![T::zero(); d * d];
        let mut translation = self.translation.clone();
        for a in 0..d {
            for b in 0..d {
                let mut acc = T::zero();
                for k in 0..d {
                    acc += self.matrix[a * d + k] * other.matrix[k * d + b];
                }
                matrix[a * d + b] = acc;
            }
            for k in 0..d {
                translation[a] += self.matrix[a * d + k] * other.translation[k];
            }
        }
        Self {
            dim: d,
            matrix,
            translation,
        }
    }

    /// 2D rotation by `deg` degrees about the center of normalized space.
    pub fn rotation_2d(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self {
            dim: 2,
            matrix: vec![T::c(c), T::c(-s), T::c(s), T::c(c)],
            translation: vec![T::zero(); 2],
        }
    }
}

/// Gradients of a loss with respect to affine parameters.
#[derive(Clone, Debug)]
pub struct AffineGrad<T> {
    pub matrix: Vec<T>,
    pub translation: Vec<T>,
}

impl<T: Scalar> AffineGrad<T> {
    pub fn to_flat(&self, dim: usize) -> Vec<T> {
        let p = AffineParams {
            dim,
            matrix: self.matrix.clone(),
            translation: self.translation.clone(),
        };
        p.to_flat()
    }
}

/// Evaluates `grid(v) = M · coord(v) + t` over every voxel.
pub fn affine_to_grid<T: Scalar>(params: &AffineParams<T>, spatial: &[usize]) -> Result<SamplingGrid<T>> {
    if spatial.len() != params.dim {
        return Err(Error::Shape(format!(
            "affine dim {} does not match spatial rank {}",
            params.dim,
            spatial.len()
        )));
    }
    params.validate()?;
    let id = identity_grid::<T>(spatial);
    let d = params.dim;
    let mut data = vec![T::zero(); id.data.len()];
    for v in 0..id.voxels() {
        let c = &id.data[v * d..(v + 1) * d];
        for a in 0..d {
            let mut acc = params.translation[a];
            for b in 0..d {
                acc += params.matrix[a * d + b] * c[b];
            }
            data[v * d + a] = acc;
        }
    }
    SamplingGrid::new(spatial, d, data)
}

/// Pulls a gradient w.r.t. the sampling grid back onto the affine parameters.
///
/// `dgrid` is laid out like the grid itself (`voxels × dim`).
pub fn affine_grid_backward<T: Scalar>(dgrid: &[T], spatial: &[usize]) -> AffineGrad<T> {
    let d = spatial.len();
    let id = identity_grid::<T>(spatial);
    let mut dm = vec![T::zero(); d * d];
    let mut dt = vec![T::zero(); d];
    for v in 0..id.voxels() {
        let c = &id.data[v * d..(v + 1) * d];
        for a in 0..d {
            let g = dgrid[v * d + a];
            dt[a] += g;
            for b in 0..d {
                dm[a * d + b] += g * c[b];
            }
        }
    }
    AffineGrad {
        matrix: dm,
        translation: dt,
    }
}
