use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::grid::SamplingGrid;

/// Multilinear resampling of a `[C, spatial..]` image at grid coordinates,
/// zero outside `[-1, 1]`. Differentiable w.r.t. both image and grid (see
/// [`resample_backward`]).
pub fn resample<T: Scalar>(img: &Tensor<T>, grid: &SamplingGrid<T>) -> Result<Tensor<T>> {
    check(img, grid)?;
    let mut out = Tensor::zeros(&out_shape(img, grid));
    forward(img, grid, &mut out);
    Ok(out)
}

/// Backward pass: given `d loss / d out`, returns gradients w.r.t. the image
/// and the grid coordinates (same layout as `grid.data`).
pub fn resample_backward<T: Scalar>(
    img: &Tensor<T>,
    grid: &SamplingGrid<T>,
    gout: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    check(img, grid)?;
    let mut dimg = Tensor::zeros(img.shape());
    let mut dgrid = vec![T::zero(); grid.data.len()];
    backward(img, grid, gout, &mut dimg, &mut dgrid);
    Ok((dimg, dgrid))
}

/// Batched resampling: image `[N, C, spatial..]`, one grid per sample.
pub fn resample_batch<T: Scalar>(imgs: &Tensor<T>, grids: &[SamplingGrid<T>]) -> Result<Tensor<T>> {
    let n = imgs.shape()[0];
    if grids.len() != n {
        return Err(Error::Shape(format!(
            "batch of {} images needs {} grids, got {}",
            n,
            n,
            grids.len()
        )));
    }
    let per_shape: Vec<usize> = imgs.shape()[1..].to_vec();
    let mut out_full = Vec::with_capacity(imgs.numel());
    for i in 0..n {
        let sample = Tensor::from_vec(&per_shape, imgs.sample(i).to_vec())?;
        let out = resample(&sample, &grids[i])?;
        out_full.extend_from_slice(out.data());
    }
    Tensor::from_vec(imgs.shape(), out_full)
}

/// Batched backward; returns image gradient and per-sample grid gradients.
pub fn resample_batch_backward<T: Scalar>(
    imgs: &Tensor<T>,
    grids: &[SamplingGrid<T>],
    gout: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<Vec<T>>)> {
    let n = imgs.shape()[0];
    let per_shape: Vec<usize> = imgs.shape()[1..].to_vec();
    let mut dimg = Tensor::zeros(imgs.shape());
    let mut dgrids = Vec::with_capacity(n);
    for i in 0..n {
        let sample = Tensor::from_vec(&per_shape, imgs.sample(i).to_vec())?;
        let gslice = Tensor::from_vec(&per_shape, gout.sample(i).to_vec())?;
        let (ds, dg) = resample_backward(&sample, &grids[i], &gslice)?;
        dimg.sample_mut(i).copy_from_slice(ds.data());
        dgrids.push(dg);
    }
    Ok((dimg, dgrids))
}

fn out_shape<T: Scalar>(img: &Tensor<T>, grid: &SamplingGrid<T>) -> Vec<usize> {
    let mut s = vec![img.shape()[0]];
    s.extend_from_slice(&grid.spatial);
    s
}

fn check<T: Scalar>(img: &Tensor<T>, grid: &SamplingGrid<T>) -> Result<()> {
    let rank = img.shape().len() - 1;
    if rank != grid.dim {
        return Err(Error::Shape(format!(
            "image rank {} does not match grid dim {}",
            rank, grid.dim
        )));
    }
    if !grid.is_finite() {
        return Err(Error::Numeric("sampling grid contains non-finite values".into()));
    }
    Ok(())
}

/// Pixel-space position of normalized coordinate `c` on an axis of size `n`.
#[inline]
fn to_pixel(c: f64, n: usize) -> f64 {
    (c + 1.0) * 0.5 * (n as f64 - 1.0)
}

fn forward<T: Scalar>(img: &Tensor<T>, grid: &SamplingGrid<T>, out: &mut Tensor<T>) {
    let channels = img.shape()[0];
    let voxels = grid.voxels();
    match grid.dim {
        2 => {
            let (h, w) = (img.shape()[1], img.shape()[2]);
            let plane = h * w;
            for v in 0..voxels {
                let px = to_pixel(grid.data[v * 2].as_f64(), w);
                let py = to_pixel(grid.data[v * 2 + 1].as_f64(), h);
                let x0 = px.floor();
                let y0 = py.floor();
                let fx = px - x0;
                let fy = py - y0;
                let (x0, y0) = (x0 as isize, y0 as isize);
                for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
                    let yc = y0 + dy;
                    if yc < 0 || yc >= h as isize || wy == 0.0 {
                        continue;
                    }
                    for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                        let xc = x0 + dx;
                        if xc < 0 || xc >= w as isize || wx == 0.0 {
                            continue;
                        }
                        let wgt = T::c(wx * wy);
                        let src = yc as usize * w + xc as usize;
                        for c in 0..channels {
                            let val = img.data()[c * plane + src];
                            out.data_mut()[c * voxels + v] += wgt * val;
                        }
                    }
                }
            }
        }
        3 => {
            let (d, h, w) = (img.shape()[1], img.shape()[2], img.shape()[3]);
            let volume = d * h * w;
            for v in 0..voxels {
                let px = to_pixel(grid.data[v * 3].as_f64(), w);
                let py = to_pixel(grid.data[v * 3 + 1].as_f64(), h);
                let pz = to_pixel(grid.data[v * 3 + 2].as_f64(), d);
                let (x0, y0, z0) = (px.floor(), py.floor(), pz.floor());
                let (fx, fy, fz) = (px - x0, py - y0, pz - z0);
                let (x0, y0, z0) = (x0 as isize, y0 as isize, z0 as isize);
                for (dz, wz) in [(0isize, 1.0 - fz), (1, fz)] {
                    let zc = z0 + dz;
                    if zc < 0 || zc >= d as isize || wz == 0.0 {
                        continue;
                    }
                    for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
                        let yc = y0 + dy;
                        if yc < 0 || yc >= h as isize || wy == 0.0 {
                            continue;
                        }
                        for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                            let xc = x0 + dx;
                            if xc < 0 || xc >= w as isize || wx == 0.0 {
                                continue;
                            }
                            let wgt = T::c(wx * wy * wz);
                            let src = (zc as usize * h + yc as usize) * w + xc as usize;
                            for c in 0..channels {
                                let val = img.data()[c * volume + src];
                                out.data_mut()[c * voxels + v] += wgt * val;
                            }
                        }
                    }
                }
            }
        }
        _ => unreachable!("grid dim checked earlier"),
    }
}

fn backward<T: Scalar>(
    img: &Tensor<T>,
    grid: &SamplingGrid<T>,
    gout: &Tensor<T>,
    dimg: &mut Tensor<T>,
    dgrid: &mut [T],
) {
    let channels = img.shape()[0];
    let voxels = grid.voxels();
    match grid.dim {
        2 => {
            let (h, w) = (img.shape()[1], img.shape()[2]);
            let plane = h * w;
            let sx = 0.5 * (w as f64 - 1.0);
            let sy = 0.5 * (h as f64 - 1.0);
            for v in 0..voxels {
                let px = to_pixel(grid.data[v * 2].as_f64(), w);
                let py = to_pixel(grid.data[v * 2 + 1].as_f64(), h);
                let x0 = px.floor();
                let y0 = py.floor();
                let fx = px - x0;
                let fy = py - y0;
                let (x0, y0) = (x0 as isize, y0 as isize);
                let mut dpx = 0.0f64;
                let mut dpy = 0.0f64;
                for (dy, wy, sy_sign) in [(0isize, 1.0 - fy, -1.0), (1, fy, 1.0)] {
                    let yc = y0 + dy;
                    if yc < 0 || yc >= h as isize {
                        continue;
                    }
                    for (dx, wx, sx_sign) in [(0isize, 1.0 - fx, -1.0), (1, fx, 1.0)] {
                        let xc = x0 + dx;
                        if xc < 0 || xc >= w as isize {
                            continue;
                        }
                        let src = yc as usize * w + xc as usize;
                        for c in 0..channels {
                            let g = gout.data()[c * voxels + v].as_f64();
                            if g == 0.0 {
                                continue;
                            }
                            let val = img.data()[c * plane + src].as_f64();
                            dimg.data_mut()[c * plane + src] += T::c(g * wx * wy);
                            dpx += g * sx_sign * wy * val;
                            dpy += g * wx * sy_sign * val;
                        }
                    }
                }
                dgrid[v * 2] = T::c(dpx * sx);
                dgrid[v * 2 + 1] = T::c(dpy * sy);
            }
        }
        3 => {
            let (d, h, w) = (img.shape()[1], img.shape()[2], img.shape()[3]);
            let volume = d * h * w;
            let sx = 0.5 * (w as f64 - 1.0);
            let sy = 0.5 * (h as f64 - 1.0);
            let sz = 0.5 * (d as f64 - 1.0);
            for v in 0..voxels {
                let px = to_pixel(grid.data[v * 3].as_f64(), w);
                let py = to_pixel(grid.data[v * 3 + 1].as_f64(), h);
                let pz = to_pixel(grid.data[v * 3 + 2].as_f64(), d);
                let (x0, y0, z0) = (px.floor(), py.floor(), pz.floor());
                let (fx, fy, fz) = (px - x0, py - y0, pz - z0);
                let (x0, y0, z0) = (x0 as isize, y0 as isize, z0 as isize);
                let mut dp = [0.0f64; 3];
                for (dz, wz, zsgn) in [(0isize, 1.0 - fz, -1.0), (1, fz, 1.0)] {
                    let zc = z0 + dz;
                    if zc < 0 || zc >= d as isize {
                        continue;
                    }
                    for (dy, wy, ysgn) in [(0isize, 1.0 - fy, -1.0), (1, fy, 1.0)] {
                        let yc = y0 + dy;
                        if yc < 0 || yc >= h as isize {
                            continue;
                        }
                        for (dx, wx, xsgn) in [(0isize, 1.0 - fx, -1.0), (1, fx, 1.0)] {
                            let xc = x0 + dx;
                            if xc < 0 || xc >= w as isize {
                                continue;
                            }
                            let src = (zc as usize * h + yc as usize) * w + xc as usize;
                            for c in 0..channels {
                                let g = gout.data()[c * voxels + v].as_f64();
                                if g == 0.0 {
                                    continue;
                                }
                                let val = img.data()[c * volume + src].as_f64();
                                dimg.data_mut()[c * volume + src] += T::c(g * wx * wy * wz);
                                dp[0] += g * xsgn * wy * wz * val;
                                dp[1] += g * wx * ysgn * wz * val;
                                dp[2] += g * wx * wy * zsgn * val;
                            }
                        }
                    }
                }
                dgrid[v * 3] = T::c(dp[0] * sx);
                dgrid[v * 3 + 1] = T::c(dp[1] * sy);
                dgrid[v * 3 + 2] = T::c(dp[2] * sz);
            }
        }
        _ => unreachable!(),
    }
}
