use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::field::DenseDisplacementField;

/// Displacements on a regular control-point lattice, interpolated to a dense
/// field with the cubic B-spline tensor-product kernel (free-form
/// deformation).
///
/// For an image axis of size `n` with spacing `s`, the lattice has
/// `floor(n/s) + 3` knots: one-cell margin each side plus cubic support. Knot
/// `j` sits at pixel `(j - 1) * s`. Displacements are in normalized
/// coordinates and stored row-major over the lattice with the vector
/// components (x first) interleaved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPointGrid<T> {
    pub spacing: usize,
    /// Lattice dims per spatial axis, same axis order as the image shape.
    pub dims: Vec<usize>,
    pub disp: Vec<T>,
}

/// Lattice dims for an image shape: `floor(n / spacing) + 3` per axis.
pub fn lattice_dims(spatial: &[usize], spacing: usize) -> Vec<usize> {
    spatial.iter().map(|&n| n / spacing + 3).collect()
}

impl<T: Scalar> ControlPointGrid<T> {
    pub fn zeros(spatial: &[usize], spacing: usize) -> Result<Self> {
        if spacing == 0 {
            return Err(Error::Param("control-point spacing must be positive".into()));
        }
        let dims = lattice_dims(spatial, spacing);
        let n: usize = dims.iter().product();
        Ok(Self {
            spacing,
            dims: dims.clone(),
            disp: vec![T::zero(); n * spatial.len()],
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn lattice_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn validate_for(&self, spatial: &[usize]) -> Result<()> {
        if self.spacing == 0 {
            return Err(Error::Param("control-point spacing must be positive".into()));
        }
        let expect = lattice_dims(spatial, self.spacing);
        if expect != self.dims {
            return Err(Error::Shape(format!(
                "lattice dims {:?} inconsistent with shape {:?} at spacing {} (want {:?})",
                self.dims, spatial, self.spacing, expect
            )));
        }
        if self.disp.len() != self.lattice_len() * self.dims.len() {
            return Err(Error::Shape(format!(
                "lattice {:?} needs {} displacement values, got {}",
                self.dims,
                self.lattice_len() * self.dims.len(),
                self.disp.len()
            )));
        }
        Ok(())
    }
}

/// Cardinal cubic B-spline kernel, support `|u| < 2`.
pub fn cubic_bspline(u: f64) -> f64 {
    let a = u.abs();
    if a < 1.0 {
        (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0
    } else if a < 2.0 {
        let b = 2.0 - a;
        b * b * b / 6.0
    } else {
        0.0
    }
}

/// The four basis weights on a unit cell at local parameter `t ∈ [0, 1)`.
#[inline]
fn cell_weights<T: Scalar>(t: f64) -> [T; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        T::c((1.0 - t) * (1.0 - t) * (1.0 - t) / 6.0),
        T::c((3.0 * t3 - 6.0 * t2 + 4.0) / 6.0),
        T::c((-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0),
        T::c(t3 / 6.0),
    ]
}

/// Per-axis table: for every pixel index, the first contributing knot and the
/// four clamped knot indices with their weights.
fn axis_table<T: Scalar>(n: usize, spacing: usize, knots: usize) -> Vec<([usize; 4], [T; 4])> {
    (0..n)
        .map(|i| {
            let u = i as f64 / spacing as f64;
            let cell = u.floor() as usize;
            let t = u - cell as f64;
            let w = cell_weights::<T>(t);
            let mut idx = [0usize; 4];
            for (m, slot) in idx.iter_mut().enumerate() {
                // Knot index is cell + m; the far margin clamps (border
                // replicate) so partition of unity is preserved.
                *slot = (cell + m).min(knots - 1);
            }
            (idx, w)
        })
        .collect()
}

/// Interpolates lattice displacements to a dense per-voxel field.
pub fn cpgrid_to_dense<T: Scalar>(
    grid: &ControlPointGrid<T>,
    spatial: &[usize],
) -> Result<DenseDisplacementField<T>> {
    grid.validate_for(spatial)?;
    let dim = spatial.len();
    let voxels: usize = spatial.iter().product();
    let mut data = vec![T::zero(); voxels * dim];
    match dim {
        2 => {
            let (h, w) = (spatial[0], spatial[1]);
            let (lh, lw) = (grid.dims[0], grid.dims[1]);
            let rows = axis_table::<T>(h, grid.spacing, lh);
            let cols = axis_table::<T>(w, grid.spacing, lw);
            let mut v = 0;
            for (ri, rw) in rows.iter() {
                for (ci, cw) in cols.iter() {
                    let mut acc = [T::zero(); 2];
                    for mi in 0..4 {
                        let row_off = ri[mi] * lw;
                        for mj in 0..4 {
                            let wgt = rw[mi] * cw[mj];
                            let base = (row_off + ci[mj]) * 2;
                            acc[0] += wgt * grid.disp[base];
                            acc[1] += wgt * grid.disp[base + 1];
                        }
                    }
                    data[v * 2] = acc[0];
                    data[v * 2 + 1] = acc[1];
                    v += 1;
                }
            }
        }
        3 => {
            let (d, h, w) = (spatial[0], spatial[1], spatial[2]);
            let (ld, lh, lw) = (grid.dims[0], grid.dims[1], grid.dims[2]);
            let deps = axis_table::<T>(d, grid.spacing, ld);
            let rows = axis_table::<T>(h, grid.spacing, lh);
            let cols = axis_table::<T>(w, grid.spacing, lw);
            let mut v = 0;
            for (di, dw) in deps.iter() {
                for (ri, rw) in rows.iter() {
                    for (ci, cw) in cols.iter() {
                        let mut acc = [T::zero(); 3];
                        for mk in 0..4 {
                            let dep_off = di[mk] * lh;
                            for mi in 0..4 {
                                let row_off = (dep_off + ri[mi]) * lw;
                                let wki = dw[mk] * rw[mi];
                                for mj in 0..4 {
                                    let wgt = wki * cw[mj];
                                    let base = (row_off + ci[mj]) * 3;
                                    acc[0] += wgt * grid.disp[base];
                                    acc[1] += wgt * grid.disp[base + 1];
                                    acc[2] += wgt * grid.disp[base + 2];
                                }
                            }
                        }
                        data[v * 3] = acc[0];
                        data[v * 3 + 1] = acc[1];
                        data[v * 3 + 2] = acc[2];
                        v += 1;
                    }
                }
            }
        }
        _ => {
            return Err(Error::Shape(format!(
                "control-point grids support 2D and 3D, got rank {dim}"
            )))
        }
    }
    Ok(DenseDisplacementField {
        spatial: spatial.to_vec(),
        dim,
        data,
    })
}

/// Transpose of [`cpgrid_to_dense`]: scatters a dense-field gradient back to
/// lattice-displacement gradients.
pub fn dense_to_cpgrid_grad<T: Scalar>(
    grid: &ControlPointGrid<T>,
    spatial: &[usize],
    dfield: &[T],
) -> Result<Vec<T>> {
    grid.validate_for(spatial)?;
    let dim = spatial.len();
    let voxels: usize = spatial.iter().product();
    if dfield.len() != voxels * dim {
        return Err(Error::Shape(format!(
            "field gradient has {} values, want {}",
            dfield.len(),
            voxels * dim
        )));
    }
    let mut ddisp = vec![T::zero(); grid.disp.len()];
    match dim {
        2 => {
            let (h, w) = (spatial[0], spatial[1]);
            let (lh, lw) = (grid.dims[0], grid.dims[1]);
            let rows = axis_table::<T>(h, grid.spacing, lh);
            let cols = axis_table::<T>(w, grid.spacing, lw);
            let mut v = 0;
            for (ri, rw) in rows.iter() {
                for (ci, cw) in cols.iter() {
                    let gx = dfield[v * 2];
                    let gy = dfield[v * 2 + 1];
                    for mi in 0..4 {
                        let row_off = ri[mi] * lw;
                        for mj in 0..4 {
                            let wgt = rw[mi] * cw[mj];
                            let base = (row_off + ci[mj]) * 2;
                            ddisp[base] += wgt * gx;
                            ddisp[base + 1] += wgt * gy;
                        }
                    }
                    v += 1;
                }
            }
        }
        3 => {
            let (d, h, w) = (spatial[0], spatial[1], spatial[2]);
            let (ld, lh, lw) = (grid.dims[0], grid.dims[1], grid.dims[2]);
            let deps = axis_table::<T>(d, grid.spacing, ld);
            let rows = axis_table::<T>(h, grid.spacing, lh);
            let cols = axis_table::<T>(w, grid.spacing, lw);
            let mut v = 0;
            for (di, dw) in deps.iter() {
                for (ri, rw) in rows.iter() {
                    for (ci, cw) in cols.iter() {
                        let g = [dfield[v * 3], dfield[v * 3 + 1], dfield[v * 3 + 2]];
                        for mk in 0..4 {
                            let dep_off = di[mk] * lh;
                            for mi in 0..4 {
                                let row_off = (dep_off + ri[mi]) * lw;
                                let wki = dw[mk] * rw[mi];
                                for mj in 0..4 {
                                    let wgt = wki * cw[mj];
                                    let base = (row_off + ci[mj]) * 3;
                                    ddisp[base] += wgt * g[0];
                                    ddisp[base + 1] += wgt * g[1];
                                    ddisp[base + 2] += wgt * g[2];
                                }
                            }
                        }
                        v += 1;
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(ddisp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_rule_matches_expected_sizes() {
        assert_eq!(lattice_dims(&[28, 28], 8), vec![6, 6]);
        assert_eq!(lattice_dims(&[28, 28], 4), vec![10, 10]);
        assert_eq!(lattice_dims(&[64, 64, 64], 16), vec![7, 7, 7]);
        assert_eq!(lattice_dims(&[64, 64, 64], 8), vec![11, 11, 11]);
    }

    #[test]
    fn zero_displacements_give_zero_field() {
        let g = ControlPointGrid::<f64>::zeros(&[28, 28], 8).unwrap();
        let f = cpgrid_to_dense(&g, &[28, 28]).unwrap();
        assert!(f.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_spacing_is_param_error() {
        assert!(matches!(
            ControlPointGrid::<f32>::zeros(&[28, 28], 0),
            Err(Error::Param(_))
        ));
    }

    /// De Boor recurrence for the uniform cubic B-spline on knots
    /// {-2,-1,0,1,2}, evaluated directly as the oracle for the closed form.
    fn de_boor_cubic(u: f64) -> f64 {
        fn n(i: f64, k: usize, u: f64) -> f64 {
            if k == 0 {
                // Support [i, i+1)
                if u >= i && u < i + 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let kf = k as f64;
                (u - i) / kf * n(i, k - 1, u) + (i + kf + 1.0 - u) / kf * n(i + 1.0, k - 1, u)
            }
        }
        // Centered cardinal spline: N_{-2,3}(u) shifted so the peak is at 0.
        n(-2.0, 3, u)
    }

    #[test]
    fn closed_form_kernel_matches_de_boor_recurrence() {
        for step in -40..=40 {
            let u = step as f64 * 0.05;
            let got = cubic_bspline(u);
            let want = de_boor_cubic(u);
            assert!(
                (got - want).abs() < 1e-12,
                "kernel mismatch at u={u}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn single_knot_response_is_separable_kernel() {
        // Unit x-displacement at an interior knot; the dense response at
        // voxel (i, j) must equal B((i - py)/s) * B((j - px)/s).
        let spatial = [28usize, 28usize];
        let s = 4usize;
        let mut g = ControlPointGrid::<f64>::zeros(&spatial, s).unwrap();
        let (ki, kj) = (4usize, 5usize); // knot position ((k-1)*s) = (12, 16)
        g.disp[(ki * g.dims[1] + kj) * 2] = 1.0;
        let f = cpgrid_to_dense(&g, &spatial).unwrap();
        for i in 0..spatial[0] {
            for j in 0..spatial[1] {
                let py = (ki as f64 - 1.0) * s as f64;
                let px = (kj as f64 - 1.0) * s as f64;
                let want = cubic_bspline((i as f64 - py) / s as f64)
                    * cubic_bspline((j as f64 - px) / s as f64);
                let got = f.data[(i * spatial[1] + j) * 2];
                assert!(
                    (got - want).abs() < 1e-5,
                    "response mismatch at ({i},{j}): {got} vs {want}"
                );
                assert_eq!(f.data[(i * spatial[1] + j) * 2 + 1], 0.0);
            }
        }
    }

    #[test]
    fn dense_is_linear_in_displacements() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spatial = [20usize, 24usize];
        let mut g1 = ControlPointGrid::<f64>::zeros(&spatial, 8).unwrap();
        let mut g2 = g1.clone();
        for v in g1.disp.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in g2.disp.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (a, b) = (0.7f64, -1.3f64);
        let mut gc = g1.clone();
        for (c, (x, y)) in gc.disp.iter_mut().zip(g1.disp.iter().zip(g2.disp.iter())) {
            *c = a * x + b * y;
        }
        let f1 = cpgrid_to_dense(&g1, &spatial).unwrap();
        let f2 = cpgrid_to_dense(&g2, &spatial).unwrap();
        let fc = cpgrid_to_dense(&gc, &spatial).unwrap();
        for v in 0..fc.data.len() {
            let want = a * f1.data[v] + b * f2.data[v];
            assert!((fc.data[v] - want).abs() < 1e-6);
        }
    }

    #[test]
    fn scatter_is_transpose_of_interpolation() {
        // <dense(g), f> == <g, scatter(f)> for random g, f.
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let spatial = [12usize, 16usize];
        let mut g = ControlPointGrid::<f64>::zeros(&spatial, 4).unwrap();
        for v in g.disp.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let dense = cpgrid_to_dense(&g, &spatial).unwrap();
        let f: Vec<f64> = (0..dense.data.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let lhs: f64 = dense.data.iter().zip(f.iter()).map(|(a, b)| a * b).sum();
        let scat = dense_to_cpgrid_grad(&g, &spatial, &f).unwrap();
        let rhs: f64 = g.disp.iter().zip(scat.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }
}
