use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-voxel source coordinates in normalized `[-1, 1]` space.
///
/// `data[v * dim + a]` is the coordinate along axis `a` (x first) for output
/// voxel `v` in row-major order over `spatial`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingGrid<T> {
    pub spatial: Vec<usize>,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SamplingGrid<T> {
    pub fn new(spatial: &[usize], dim: usize, data: Vec<T>) -> Result<Self> {
        let voxels: usize = spatial.iter().product();
        if spatial.len() != dim {
            return Err(Error::Shape(format!(
                "grid spatial rank {} != dim {}",
                spatial.len(),
                dim
            )));
        }
        if data.len() != voxels * dim {
            return Err(Error::Shape(format!(
                "grid over {:?} needs {} values, got {}",
                spatial,
                voxels * dim,
                data.len()
            )));
        }
        Ok(Self {
            spatial: spatial.to_vec(),
            dim,
            data,
        })
    }

    pub fn voxels(&self) -> usize {
        self.spatial.iter().product()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.spatial, other.spatial);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0f64, |m, (a, b)| m.max((*a - *b).abs().as_f64()))
    }
}

/// Normalized coordinate of index `i` along an axis of size `n`
/// (align-corners; a singleton axis sits at 0).
#[inline]
pub(crate) fn norm_coord<T: Scalar>(i: usize, n: usize) -> T {
    if n <= 1 {
        T::zero()
    } else {
        T::c(2.0 * i as f64 / (n as f64 - 1.0) - 1.0)
    }
}

/// Identity grid: every voxel maps to itself.
pub fn identity_grid<T: Scalar>(spatial: &[usize]) -> SamplingGrid<T> {
    let dim = spatial.len();
    let voxels: usize = spatial.iter().product();
    let mut data = vec![T::zero(); voxels * dim];
    match dim {
        2 => {
            let (h, w) = (spatial[0], spatial[1]);
            let mut v = 0;
            for i in 0..h {
                let y = norm_coord::<T>(i, h);
                for j in 0..w {
                    data[v * 2] = norm_coord::<T>(j, w);
                    data[v * 2 + 1] = y;
                    v += 1;
                }
            }
        }
        3 => {
            let (d, h, w) = (spatial[0], spatial[1], spatial[2]);
            let mut v = 0;
            for k in 0..d {
                let z = norm_coord::<T>(k, d);
                for i in 0..h {
                    let y = norm_coord::<T>(i, h);
                    for j in 0..w {
                        data[v * 3] = norm_coord::<T>(j, w);
                        data[v * 3 + 1] = y;
                        data[v * 3 + 2] = z;
                        v += 1;
                    }
                }
            }
        }
        _ => panic!("identity_grid supports 2D and 3D, got rank {dim}"),
    }
    SamplingGrid {
        spatial: spatial.to_vec(),
        dim,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_grid_corners_hit_unit_bounds() {
        let g = identity_grid::<f64>(&[3, 5]);
        assert_eq!(g.data[0], -1.0); // x at (0,0)
        assert_eq!(g.data[1], -1.0); // y at (0,0)
        let last = g.voxels() - 1;
        assert_eq!(g.data[last * 2], 1.0);
        assert_eq!(g.data[last * 2 + 1], 1.0);
        // center voxel of odd axes is exactly 0
        let mid = (1 * 5 + 2) * 2;
        assert_eq!(g.data[mid], 0.0);
        assert_eq!(g.data[mid + 1], 0.0);
    }
}
