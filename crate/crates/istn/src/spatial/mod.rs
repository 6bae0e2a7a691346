//! Differentiable geometric backend: affine and B-spline control-point
//! transforms, dense displacement fields, and multilinear resampling in 2D
//! and 3D.
//!
//! Conventions (fixed for reproducibility, asserted by tests):
//! - spatial shapes are `[H, W]` (2D) or `[D, H, W]` (3D);
//! - per-voxel vectors are ordered `(x, y)` / `(x, y, z)` where `x` runs along
//!   the last (fastest) image axis;
//! - coordinates are normalized to `[-1, 1]` with align-corners semantics:
//!   index `i` along an axis of size `n` sits at `2i/(n-1) - 1`;
//! - sampling outside `[-1, 1]` contributes zero (zero padding).

mod affine;
mod bspline;
mod field;
mod grid;
mod resample;

pub use affine::{affine_grid_backward, affine_to_grid, AffineGrad, AffineParams};
pub use bspline::{cpgrid_to_dense, cubic_bspline, dense_to_cpgrid_grad, lattice_dims, ControlPointGrid};
pub use field::{compose_displacement, DenseDisplacementField};
pub use grid::{identity_grid, SamplingGrid};
pub use resample::{resample, resample_backward, resample_batch, resample_batch_backward};
