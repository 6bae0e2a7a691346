use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::{gemm_rm, gemm_rm_at, gemm_rm_bt, Scalar};
use crate::tensor::Tensor;

use super::spec::{conv_out, Activation, LayerKind, LayerSpec, Norm};

/// Mutable context threaded through a forward pass.
pub struct FwdCtx<'a> {
    pub train: bool,
    pub rng: &'a mut ChaCha8Rng,
}

/// PyTorch-style default init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
fn uniform_init<T: Scalar>(n: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| T::c(rng.random_range(-bound..bound))).collect()
}

// ---------------------------------------------------------------------------
// Convolution (2D/3D) via tiled im2col + gemm. Tiling over output voxels
// bounds the column-buffer memory at 64^3 sizes; backward recomputes the
// columns per tile instead of caching them.
// ---------------------------------------------------------------------------

/// Output voxels per im2col tile (per-sample fallback path).
const CONV_TILE: usize = 4096;
/// Whole-batch im2col buffers up to this many scalars go through a single
/// gemm per layer; beyond it (large 3D layers) the per-sample tiles bound
/// memory instead.
const BATCH_GEMM_CAP: usize = 6_000_000;

#[derive(Clone)]
struct ConvGeom {
    dim: usize,
    c_in: usize,
    k: usize,
    s: usize,
    p: usize,
    in_spatial: Vec<usize>,
    out_spatial: Vec<usize>,
}

impl ConvGeom {
    fn kk(&self) -> usize {
        self.c_in * self.k.pow(self.dim as u32)
    }

    fn osp(&self) -> usize {
        self.out_spatial.iter().product()
    }

    fn isp(&self) -> usize {
        self.in_spatial.iter().product()
    }
}


/// Output-index range `[lo, hi)` along one axis for which
/// `ox * s + koff` lands inside `[0, extent)`.
#[inline]
fn valid_span(out_len: usize, s: isize, koff: isize, extent: isize) -> (usize, usize) {
    // smallest ox with ox*s + koff >= 0
    let lo = if koff >= 0 {
        0
    } else {
        ((-koff + s - 1) / s) as usize
    };
    // largest ox with ox*s + koff < extent
    let hi_isize = if extent - koff <= 0 {
        -1
    } else {
        (extent - 1 - koff) / s
    };
    let hi = if hi_isize < 0 { 0 } else { (hi_isize as usize + 1).min(out_len) };
    (lo.min(out_len), hi.max(lo.min(out_len)))
}

/// Full-range im2col without per-element index division.
fn im2col_full<T: Scalar>(g: &ConvGeom, x: &[T], cols: &mut [T], row_stride: usize, col_off: usize) {
    let k = g.k as isize;
    let s = g.s as isize;
    let p = g.p as isize;
    match g.dim {
        2 => {
            let (ih, iw) = (g.in_spatial[0] as isize, g.in_spatial[1] as isize);
            let (oh, ow) = (g.out_spatial[0], g.out_spatial[1]);
            let plane = (ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &x[ci * plane..(ci + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let dst = &mut cols[row * row_stride + col_off..];
                        let (lo, hi) = valid_span(ow, s, kx - p, iw);
                        let mut t = 0usize;
                        for oy in 0..oh as isize {
                            let iy = oy * s + ky - p;
                            if iy < 0 || iy >= ih {
                                dst[t..t + ow].iter_mut().for_each(|v| *v = T::zero());
                                t += ow;
                                continue;
                            }
                            let base = (iy * iw) as usize;
                            dst[t..t + lo].iter_mut().for_each(|v| *v = T::zero());
                            if s == 1 {
                                let src0 = base + (lo as isize + kx - p) as usize;
                                dst[t + lo..t + hi].copy_from_slice(&xc[src0..src0 + (hi - lo)]);
                            } else {
                                let mut ix = (lo as isize * s + kx - p) as usize;
                                for d in dst[t + lo..t + hi].iter_mut() {
                                    *d = xc[base + ix];
                                    ix += s as usize;
                                }
                            }
                            dst[t + hi..t + ow].iter_mut().for_each(|v| *v = T::zero());
                            t += ow;
                        }
                        row += 1;
                    }
                }
            }
        }
        3 => {
            let (id, ih, iw) = (
                g.in_spatial[0] as isize,
                g.in_spatial[1] as isize,
                g.in_spatial[2] as isize,
            );
            let (od, oh, ow) = (g.out_spatial[0], g.out_spatial[1], g.out_spatial[2]);
            let volume = (id * ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &x[ci * volume..(ci + 1) * volume];
                for kz in 0..k {
                    for ky in 0..k {
                        for kx in 0..k {
                            let dst = &mut cols[row * row_stride + col_off..];
                            let mut t = 0usize;
                            for oz in 0..od as isize {
                                let iz = oz * s + kz - p;
                                if iz < 0 || iz >= id {
                                    for _ in 0..oh * ow {
                                        dst[t] = T::zero();
                                        t += 1;
                                    }
                                    continue;
                                }
                                for oy in 0..oh as isize {
                                    let iy = oy * s + ky - p;
                                    if iy < 0 || iy >= ih {
                                        dst[t..t + ow].iter_mut().for_each(|v| *v = T::zero());
                                        t += ow;
                                        continue;
                                    }
                                    let base = ((iz * ih + iy) * iw) as usize;
                                    let (lo, hi) = valid_span(ow, s, kx - p, iw);
                                    dst[t..t + lo].iter_mut().for_each(|v| *v = T::zero());
                                    if s == 1 {
                                        let src0 = base + (lo as isize + kx - p) as usize;
                                        dst[t + lo..t + hi]
                                            .copy_from_slice(&xc[src0..src0 + (hi - lo)]);
                                    } else {
                                        let mut ix = (lo as isize * s + kx - p) as usize;
                                        for d in dst[t + lo..t + hi].iter_mut() {
                                            *d = xc[base + ix];
                                            ix += s as usize;
                                        }
                                    }
                                    dst[t + hi..t + ow].iter_mut().for_each(|v| *v = T::zero());
                                    t += ow;
                                }
                            }
                            row += 1;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Full-range col2im (transpose of [`im2col_full`]).
fn col2im_full<T: Scalar>(g: &ConvGeom, dcols: &[T], dx: &mut [T], row_stride: usize, col_off: usize) {
    let k = g.k as isize;
    let s = g.s as isize;
    let p = g.p as isize;
    match g.dim {
        2 => {
            let (ih, iw) = (g.in_spatial[0] as isize, g.in_spatial[1] as isize);
            let (oh, ow) = (g.out_spatial[0], g.out_spatial[1]);
            let plane = (ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &mut dx[ci * plane..(ci + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let src = &dcols[row * row_stride + col_off..];
                        let (lo, hi) = valid_span(ow, s, kx - p, iw);
                        let mut t = 0usize;
                        for oy in 0..oh as isize {
                            let iy = oy * s + ky - p;
                            if iy < 0 || iy >= ih {
                                t += ow;
                                continue;
                            }
                            let base = (iy * iw) as usize;
                            let mut ix = (lo as isize * s + kx - p) as usize;
                            if s == 1 {
                                for v in src[t + lo..t + hi].iter() {
                                    xc[base + ix] += *v;
                                    ix += 1;
                                }
                            } else {
                                for v in src[t + lo..t + hi].iter() {
                                    xc[base + ix] += *v;
                                    ix += s as usize;
                                }
                            }
                            t += ow;
                        }
                        row += 1;
                    }
                }
            }
        }
        3 => {
            let (id, ih, iw) = (
                g.in_spatial[0] as isize,
                g.in_spatial[1] as isize,
                g.in_spatial[2] as isize,
            );
            let (od, oh, ow) = (g.out_spatial[0], g.out_spatial[1], g.out_spatial[2]);
            let volume = (id * ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &mut dx[ci * volume..(ci + 1) * volume];
                for kz in 0..k {
                    for ky in 0..k {
                        for kx in 0..k {
                            let src = &dcols[row * row_stride + col_off..];
                            let mut t = 0usize;
                            for oz in 0..od as isize {
                                let iz = oz * s + kz - p;
                                if iz < 0 || iz >= id {
                                    t += oh * ow;
                                    continue;
                                }
                                for oy in 0..oh as isize {
                                    let iy = oy * s + ky - p;
                                    if iy < 0 || iy >= ih {
                                        t += ow;
                                        continue;
                                    }
                                    let base = ((iz * ih + iy) * iw) as usize;
                                    let (lo, hi) = valid_span(ow, s, kx - p, iw);
                                    let mut ix = (lo as isize * s + kx - p) as usize;
                                    for v in src[t + lo..t + hi].iter() {
                                        xc[base + ix] += *v;
                                        ix += s as usize;
                                    }
                                    t += ow;
                                }
                            }
                            row += 1;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

fn im2col_range<T: Scalar>(
    g: &ConvGeom,
    x: &[T],
    cols: &mut [T],
    o0: usize,
    o1: usize,
    row_stride: usize,
    col_off: usize,
) {
    if o0 == 0 && o1 == g.osp() {
        return im2col_full(g, x, cols, row_stride, col_off);
    }
    let _ = o1 - o0;
    let k = g.k as isize;
    let s = g.s as isize;
    let p = g.p as isize;
    match g.dim {
        2 => {
            let (ih, iw) = (g.in_spatial[0] as isize, g.in_spatial[1] as isize);
            let ow = g.out_spatial[1];
            let plane = (ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &x[ci * plane..(ci + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let dst = &mut cols[row * row_stride + col_off..];
                        for (t, o) in (o0..o1).enumerate() {
                            let oy = (o / ow) as isize;
                            let ox = (o % ow) as isize;
                            let iy = oy * s + ky - p;
                            let ix = ox * s + kx - p;
                            dst[t] = if iy < 0 || iy >= ih || ix < 0 || ix >= iw {
                                T::zero()
                            } else {
                                xc[(iy * iw + ix) as usize]
                            };
                        }
                        row += 1;
                    }
                }
            }
        }
        3 => {
            let (id, ih, iw) = (
                g.in_spatial[0] as isize,
                g.in_spatial[1] as isize,
                g.in_spatial[2] as isize,
            );
            let (oh, ow) = (g.out_spatial[1], g.out_spatial[2]);
            let volume = (id * ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &x[ci * volume..(ci + 1) * volume];
                for kz in 0..k {
                    for ky in 0..k {
                        for kx in 0..k {
                            let dst = &mut cols[row * row_stride + col_off..];
                            for (t, o) in (o0..o1).enumerate() {
                                let oz = (o / (oh * ow)) as isize;
                                let rem = o % (oh * ow);
                                let oy = (rem / ow) as isize;
                                let ox = (rem % ow) as isize;
                                let iz = oz * s + kz - p;
                                let iy = oy * s + ky - p;
                                let ix = ox * s + kx - p;
                                dst[t] = if iz < 0
                                    || iz >= id
                                    || iy < 0
                                    || iy >= ih
                                    || ix < 0
                                    || ix >= iw
                                {
                                    T::zero()
                                } else {
                                    xc[((iz * ih + iy) * iw + ix) as usize]
                                };
                            }
                            row += 1;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

fn col2im_range<T: Scalar>(
    g: &ConvGeom,
    dcols: &[T],
    dx: &mut [T],
    o0: usize,
    o1: usize,
    row_stride: usize,
    col_off: usize,
) {
    if o0 == 0 && o1 == g.osp() {
        return col2im_full(g, dcols, dx, row_stride, col_off);
    }
    let _ = o1 - o0;
    let k = g.k as isize;
    let s = g.s as isize;
    let p = g.p as isize;
    match g.dim {
        2 => {
            let (ih, iw) = (g.in_spatial[0] as isize, g.in_spatial[1] as isize);
            let ow = g.out_spatial[1];
            let plane = (ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &mut dx[ci * plane..(ci + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let src = &dcols[row * row_stride + col_off..];
                        for (t, o) in (o0..o1).enumerate() {
                            let oy = (o / ow) as isize;
                            let ox = (o % ow) as isize;
                            let iy = oy * s + ky - p;
                            let ix = ox * s + kx - p;
                            if iy >= 0 && iy < ih && ix >= 0 && ix < iw {
                                xc[(iy * iw + ix) as usize] += src[t];
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
        3 => {
            let (id, ih, iw) = (
                g.in_spatial[0] as isize,
                g.in_spatial[1] as isize,
                g.in_spatial[2] as isize,
            );
            let (oh, ow) = (g.out_spatial[1], g.out_spatial[2]);
            let volume = (id * ih * iw) as usize;
            let mut row = 0usize;
            for ci in 0..g.c_in {
                let xc = &mut dx[ci * volume..(ci + 1) * volume];
                for kz in 0..k {
                    for ky in 0..k {
                        for kx in 0..k {
                            let src = &dcols[row * row_stride + col_off..];
                            for (t, o) in (o0..o1).enumerate() {
                                let oz = (o / (oh * ow)) as isize;
                                let rem = o % (oh * ow);
                                let oy = (rem / ow) as isize;
                                let ox = (rem % ow) as isize;
                                let iz = oz * s + kz - p;
                                let iy = oy * s + ky - p;
                                let ix = ox * s + kx - p;
                                if iz >= 0 && iz < id && iy >= 0 && iy < ih && ix >= 0 && ix < iw {
                                    xc[((iz * ih + iy) * iw + ix) as usize] += src[t];
                                }
                            }
                            row += 1;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

pub struct Conv<T> {
    geom: ConvGeom,
    c_out: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
    pub gw: Vec<T>,
    pub gb: Vec<T>,
    x_cache: Vec<T>,
    batch: usize,
    scratch: Vec<T>,
    yt_buf: Vec<T>,
    dcols_buf: Vec<T>,
    cols_valid: bool,
}

impl<T: Scalar> Conv<T> {
    fn new(
        dim: usize,
        c_in: usize,
        c_out: usize,
        k: usize,
        s: usize,
        p: usize,
        in_spatial: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let out_spatial: Vec<usize> = in_spatial
            .iter()
            .map(|&n| conv_out(n, k, s, p))
            .collect::<Result<_>>()?;
        let geom = ConvGeom {
            dim,
            c_in,
            k,
            s,
            p,
            in_spatial: in_spatial.to_vec(),
            out_spatial,
        };
        let fan_in = geom.kk();
        Ok(Self {
            w: uniform_init(c_out * fan_in, fan_in, rng),
            b: uniform_init(c_out, fan_in, rng),
            gw: vec![T::zero(); c_out * fan_in],
            gb: vec![T::zero(); c_out],
            geom,
            c_out,
            x_cache: Vec::new(),
            batch: 0,
            scratch: Vec::new(),
            yt_buf: Vec::new(),
            dcols_buf: Vec::new(),
            cols_valid: false,
        })
    }

    /// True when the whole batch fits one im2col buffer (2D sizes always
    /// do); large 3D layers fall back to per-sample output tiles.
    fn batched_path(&self, n: usize) -> bool {
        self.geom.kk() * n * self.geom.osp() <= BATCH_GEMM_CAP
    }

    fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.shape()[0];
        let kk = self.geom.kk();
        let osp = self.geom.osp();
        let in_len = self.geom.c_in * self.geom.isp();
        self.batch = n;
        self.x_cache.clear();
        self.x_cache.extend_from_slice(x.data());
        let mut out_shape = vec![n, self.c_out];
        out_shape.extend_from_slice(&self.geom.out_spatial);
        let mut y = Tensor::zeros(&out_shape);
        if self.batched_path(n) {
            let cols_n = n * osp;
            self.scratch.resize(kk * cols_n, T::zero());
            for i in 0..n {
                let xs = &self.x_cache[i * in_len..(i + 1) * in_len];
                im2col_range(&self.geom, xs, &mut self.scratch, 0, osp, cols_n, i * osp);
            }
            self.cols_valid = true;
            self.yt_buf.resize(self.c_out * cols_n, T::zero());
            let yt = &mut self.yt_buf;
            gemm_rm(self.c_out, kk, cols_n, T::one(), &self.w, &self.scratch, T::zero(), yt);
            for i in 0..n {
                let ys: &mut [T] = y.sample_mut(i);
                for c in 0..self.c_out {
                    let bias = self.b[c];
                    let src = &yt[c * cols_n + i * osp..c * cols_n + (i + 1) * osp];
                    let dst = &mut ys[c * osp..(c + 1) * osp];
                    for (d, s) in dst.iter_mut().zip(src.iter()) {
                        *d = *s + bias;
                    }
                }
            }
            return y;
        }
        self.cols_valid = false;
        let tile = CONV_TILE.min(osp);
        self.scratch.resize(kk * tile, T::zero());
        for i in 0..n {
            let xs = &self.x_cache[i * in_len..(i + 1) * in_len];
            let ys: &mut [T] = y.sample_mut(i);
            let mut o0 = 0;
            while o0 < osp {
                let o1 = (o0 + tile).min(osp);
                let tlen = o1 - o0;
                im2col_range(&self.geom, xs, &mut self.scratch[..kk * tlen], o0, o1, tlen, 0);
                // y[:, o0..o1] = W (c_out x kk) * cols (kk x tlen)
                unsafe {
                    T::gemm(
                        self.c_out,
                        kk,
                        tlen,
                        T::one(),
                        self.w.as_ptr(),
                        kk as isize,
                        1,
                        self.scratch.as_ptr(),
                        tlen as isize,
                        1,
                        T::zero(),
                        ys.as_mut_ptr().add(o0),
                        osp as isize,
                        1,
                    );
                }
                o0 = o1;
            }
            for c in 0..self.c_out {
                let bias = self.b[c];
                for v in ys[c * osp..(c + 1) * osp].iter_mut() {
                    *v += bias;
                }
            }
        }
        y
    }

    fn backward(&mut self, gout: &Tensor<T>) -> Tensor<T> {
        self.backward_opts(gout, true)
    }

    fn backward_opts(&mut self, gout: &Tensor<T>, param_grads: bool) -> Tensor<T> {
        let n = self.batch;
        let kk = self.geom.kk();
        let osp = self.geom.osp();
        let in_len = self.geom.c_in * self.geom.isp();
        let mut in_shape = vec![n, self.geom.c_in];
        in_shape.extend_from_slice(&self.geom.in_spatial);
        let mut dx = Tensor::zeros(&in_shape);
        if self.batched_path(n) {
            let cols_n = n * osp;
            if param_grads && !self.cols_valid {
                self.scratch.resize(kk * cols_n, T::zero());
                for i in 0..n {
                    let xs = &self.x_cache[i * in_len..(i + 1) * in_len];
                    im2col_range(&self.geom, xs, &mut self.scratch, 0, osp, cols_n, i * osp);
                }
                self.cols_valid = true;
            }
            // gout transposed to (c_out x n*osp)
            self.yt_buf.resize(self.c_out * cols_n, T::zero());
            let gt = &mut self.yt_buf;
            for i in 0..n {
                let gs = gout.sample(i);
                for c in 0..self.c_out {
                    gt[c * cols_n + i * osp..c * cols_n + (i + 1) * osp]
                        .copy_from_slice(&gs[c * osp..(c + 1) * osp]);
                }
            }
            if param_grads {
                gemm_rm_bt(self.c_out, cols_n, kk, T::one(), gt, &self.scratch, T::one(), &mut self.gw);
                for c in 0..self.c_out {
                    self.gb[c] += gt[c * cols_n..(c + 1) * cols_n].iter().copied().sum();
                }
            }
            self.dcols_buf.resize(kk * cols_n, T::zero());
            gemm_rm_at(kk, self.c_out, cols_n, T::one(), &self.w, &self.yt_buf, T::zero(), &mut self.dcols_buf);
            for i in 0..n {
                col2im_range(&self.geom, &self.dcols_buf, dx.sample_mut(i), 0, osp, cols_n, i * osp);
            }
            return dx;
        }
        let _ = param_grads;
        let tile = CONV_TILE.min(osp);
        self.scratch.resize(kk * tile, T::zero());
        self.dcols_buf.resize(kk * tile, T::zero());
        let mut dcols = std::mem::take(&mut self.dcols_buf);
        for i in 0..n {
            let xs = &self.x_cache[i * in_len..(i + 1) * in_len];
            let gs = gout.sample(i);
            let dxs = dx.sample_mut(i);
            let mut o0 = 0;
            while o0 < osp {
                let o1 = (o0 + tile).min(osp);
                let tlen = o1 - o0;
                im2col_range(&self.geom, xs, &mut self.scratch[..kk * tlen], o0, o1, tlen, 0);
                unsafe {
                    // gw += g[:, o0..o1] (c_out x tlen) * cols^T (tlen x kk)
                    T::gemm(
                        self.c_out,
                        tlen,
                        kk,
                        T::one(),
                        gs.as_ptr().add(o0),
                        osp as isize,
                        1,
                        self.scratch.as_ptr(),
                        1,
                        tlen as isize,
                        T::one(),
                        self.gw.as_mut_ptr(),
                        kk as isize,
                        1,
                    );
                    // dcols = W^T (kk x c_out) * g[:, o0..o1] (c_out x tlen)
                    T::gemm(
                        kk,
                        self.c_out,
                        tlen,
                        T::one(),
                        self.w.as_ptr(),
                        1,
                        kk as isize,
                        gs.as_ptr().add(o0),
                        osp as isize,
                        1,
                        T::zero(),
                        dcols.as_mut_ptr(),
                        tlen as isize,
                        1,
                    );
                }
                col2im_range(&self.geom, &dcols[..kk * tlen], dxs, o0, o1, tlen, 0);
                o0 = o1;
            }
            for c in 0..self.c_out {
                self.gb[c] += gs[c * osp..(c + 1) * osp].iter().copied().sum();
            }
        }
        self.dcols_buf = dcols;
        dx
    }

    fn zero_grad(&mut self) {
        self.gw.iter_mut().for_each(|v| *v = T::zero());
        self.gb.iter_mut().for_each(|v| *v = T::zero());
    }
}

// ---------------------------------------------------------------------------
// 2x multilinear upsampling (edge-clamped), the front half of `up` rows.
// ---------------------------------------------------------------------------

struct Upsample<T> {
    in_spatial: Vec<usize>,
    channels: usize,
    /// Per axis, per output index: two source taps (index, weight).
    taps: Vec<Vec<((usize, T), (usize, T))>>,
    batch: usize,
}

impl<T: Scalar> Upsample<T> {
    fn new(channels: usize, in_spatial: &[usize]) -> Self {
        let taps = in_spatial
            .iter()
            .map(|&n| {
                (0..2 * n)
                    .map(|i| {
                        let u = (i as f64 + 0.5) / 2.0 - 0.5;
                        let i0 = u.floor();
                        let f = u - i0;
                        let i0c = (i0.max(0.0) as usize).min(n - 1);
                        let i1c = ((i0 as isize + 1).max(0) as usize).min(n - 1);
                        ((i0c, T::c(1.0 - f)), (i1c, T::c(f)))
                    })
                    .collect()
            })
            .collect();
        Self {
            in_spatial: in_spatial.to_vec(),
            channels,
            taps,
            batch: 0,
        }
    }

    fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.shape()[0];
        self.batch = n;
        let out_spatial: Vec<usize> = self.in_spatial.iter().map(|&v| v * 2).collect();
        let mut shape = vec![n, self.channels];
        shape.extend_from_slice(&out_spatial);
        let mut y = Tensor::zeros(&shape);
        match self.in_spatial.len() {
            2 => {
                let (ih, iw) = (self.in_spatial[0], self.in_spatial[1]);
                let (oh, ow) = (ih * 2, iw * 2);
                for i in 0..n {
                    let xs = x.sample(i);
                    let ys = y.sample_mut(i);
                    for c in 0..self.channels {
                        let xc = &xs[c * ih * iw..(c + 1) * ih * iw];
                        let yc = &mut ys[c * oh * ow..(c + 1) * oh * ow];
                        for oy in 0..oh {
                            let ((y0, wy0), (y1, wy1)) = self.taps[0][oy];
                            let r0 = &xc[y0 * iw..y0 * iw + iw];
                            let r1 = &xc[y1 * iw..y1 * iw + iw];
                            let dst = &mut yc[oy * ow..(oy + 1) * ow];
                            for (ox, d) in dst.iter_mut().enumerate() {
                                let ((x0, wx0), (x1, wx1)) = self.taps[1][ox];
                                *d = wy0 * (wx0 * r0[x0] + wx1 * r0[x1])
                                    + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
                            }
                        }
                    }
                }
            }
            3 => {
                let (id, ih, iw) = (self.in_spatial[0], self.in_spatial[1], self.in_spatial[2]);
                let (od, oh, ow) = (id * 2, ih * 2, iw * 2);
                for i in 0..n {
                    let xs = x.sample(i);
                    let ys = y.sample_mut(i);
                    for c in 0..self.channels {
                        let xc = &xs[c * id * ih * iw..(c + 1) * id * ih * iw];
                        let yc = &mut ys[c * od * oh * ow..(c + 1) * od * oh * ow];
                        for oz in 0..od {
                            let ((z0, wz0), (z1, wz1)) = self.taps[0][oz];
                            for oy in 0..oh {
                                let ((y0, wy0), (y1, wy1)) = self.taps[1][oy];
                                for ox in 0..ow {
                                    let ((x0, wx0), (x1, wx1)) = self.taps[2][ox];
                                    let mut v = T::zero();
                                    for &(zi, wz) in [(z0, wz0), (z1, wz1)].iter() {
                                        for &(yi, wy) in [(y0, wy0), (y1, wy1)].iter() {
                                            let base = (zi * ih + yi) * iw;
                                            v += wz
                                                * wy
                                                * (wx0 * xc[base + x0] + wx1 * xc[base + x1]);
                                        }
                                    }
                                    yc[(oz * oh + oy) * ow + ox] = v;
                                }
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        y
    }

    fn backward(&self, gout: &Tensor<T>) -> Tensor<T> {
        let n = self.batch;
        let mut shape = vec![n, self.channels];
        shape.extend_from_slice(&self.in_spatial);
        let mut dx = Tensor::zeros(&shape);
        match self.in_spatial.len() {
            2 => {
                let (ih, iw) = (self.in_spatial[0], self.in_spatial[1]);
                let (oh, ow) = (ih * 2, iw * 2);
                for i in 0..n {
                    let gs = gout.sample(i);
                    let ds = dx.sample_mut(i);
                    for c in 0..self.channels {
                        let gc = &gs[c * oh * ow..(c + 1) * oh * ow];
                        let dc = &mut ds[c * ih * iw..(c + 1) * ih * iw];
                        for oy in 0..oh {
                            let ((y0, wy0), (y1, wy1)) = self.taps[0][oy];
                            for ox in 0..ow {
                                let ((x0, wx0), (x1, wx1)) = self.taps[1][ox];
                                let g = gc[oy * ow + ox];
                                dc[y0 * iw + x0] += g * wy0 * wx0;
                                dc[y0 * iw + x1] += g * wy0 * wx1;
                                dc[y1 * iw + x0] += g * wy1 * wx0;
                                dc[y1 * iw + x1] += g * wy1 * wx1;
                            }
                        }
                    }
                }
            }
            3 => {
                let (id, ih, iw) = (self.in_spatial[0], self.in_spatial[1], self.in_spatial[2]);
                let (od, oh, ow) = (id * 2, ih * 2, iw * 2);
                for i in 0..n {
                    let gs = gout.sample(i);
                    let ds = dx.sample_mut(i);
                    for c in 0..self.channels {
                        let gc = &gs[c * od * oh * ow..(c + 1) * od * oh * ow];
                        let dc = &mut ds[c * id * ih * iw..(c + 1) * id * ih * iw];
                        for oz in 0..od {
                            let ((z0, wz0), (z1, wz1)) = self.taps[0][oz];
                            for oy in 0..oh {
                                let ((y0, wy0), (y1, wy1)) = self.taps[1][oy];
                                for ox in 0..ow {
                                    let ((x0, wx0), (x1, wx1)) = self.taps[2][ox];
                                    let g = gc[(oz * oh + oy) * ow + ox];
                                    for &(zi, wz) in [(z0, wz0), (z1, wz1)].iter() {
                                        for &(yi, wy) in [(y0, wy0), (y1, wy1)].iter() {
                                            let base = (zi * ih + yi) * iw;
                                            dc[base + x0] += g * wz * wy * wx0;
                                            dc[base + x1] += g * wz * wy * wx1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Max pooling.
// ---------------------------------------------------------------------------

struct MaxPool<T> {
    channels: usize,
    k: usize,
    s: usize,
    p: usize,
    in_spatial: Vec<usize>,
    out_spatial: Vec<usize>,
    argmax: Vec<u32>,
    batch: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Scalar> MaxPool<T> {
    fn new(channels: usize, k: usize, s: usize, p: usize, in_spatial: &[usize]) -> Result<Self> {
        let out_spatial: Vec<usize> = in_spatial
            .iter()
            .map(|&n| conv_out(n, k, s, p))
            .collect::<Result<_>>()?;
        Ok(Self {
            channels,
            k,
            s,
            p,
            in_spatial: in_spatial.to_vec(),
            out_spatial,
            argmax: Vec::new(),
            batch: 0,
            _marker: std::marker::PhantomData,
        })
    }

    fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.shape()[0];
        self.batch = n;
        let osp: usize = self.out_spatial.iter().product();
        let isp: usize = self.in_spatial.iter().product();
        self.argmax.resize(n * self.channels * osp, 0);
        let mut shape = vec![n, self.channels];
        shape.extend_from_slice(&self.out_spatial);
        let mut y = Tensor::zeros(&shape);
        let k = self.k as isize;
        let s = self.s as isize;
        let p = self.p as isize;
        let three_d = self.in_spatial.len() == 3;
        let (id, ih, iw) = if three_d {
            (self.in_spatial[0], self.in_spatial[1], self.in_spatial[2])
        } else {
            (1, self.in_spatial[0], self.in_spatial[1])
        };
        let (od, oh, ow) = if three_d {
            (self.out_spatial[0], self.out_spatial[1], self.out_spatial[2])
        } else {
            (1, self.out_spatial[0], self.out_spatial[1])
        };
        for i in 0..n {
            let xs = x.sample(i);
            let ys = y.sample_mut(i);
            for c in 0..self.channels {
                let xc = &xs[c * isp..(c + 1) * isp];
                for oz in 0..od {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = T::neg_infinity();
                            let mut best_idx = 0u32;
                            let zr = if three_d { self.k as isize } else { 1 };
                            for kz in 0..zr {
                                let iz = if three_d { oz as isize * s + kz - p } else { 0 };
                                if iz < 0 || iz >= id as isize {
                                    continue;
                                }
                                for ky in 0..k {
                                    let iy = oy as isize * s + ky - p;
                                    if iy < 0 || iy >= ih as isize {
                                        continue;
                                    }
                                    for kx in 0..k {
                                        let ix = ox as isize * s + kx - p;
                                        if ix < 0 || ix >= iw as isize {
                                            continue;
                                        }
                                        let idx =
                                            (iz as usize * ih + iy as usize) * iw + ix as usize;
                                        if xc[idx] > best {
                                            best = xc[idx];
                                            best_idx = idx as u32;
                                        }
                                    }
                                }
                            }
                            let o = (oz * oh + oy) * ow + ox;
                            ys[c * osp + o] = best;
                            self.argmax[(i * self.channels + c) * osp + o] = best_idx;
                        }
                    }
                }
            }
        }
        y
    }

    fn backward(&self, gout: &Tensor<T>) -> Tensor<T> {
        let n = self.batch;
        let osp: usize = self.out_spatial.iter().product();
        let isp: usize = self.in_spatial.iter().product();
        let mut shape = vec![n, self.channels];
        shape.extend_from_slice(&self.in_spatial);
        let mut dx = Tensor::zeros(&shape);
        for i in 0..n {
            let gs = gout.sample(i);
            let ds = dx.sample_mut(i);
            for c in 0..self.channels {
                for o in 0..osp {
                    let src = self.argmax[(i * self.channels + c) * osp + o] as usize;
                    ds[c * isp + src] += gs[c * osp + o];
                }
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Linear over flattened features.
// ---------------------------------------------------------------------------

pub struct Linear<T> {
    pub f_in: usize,
    pub f_out: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
    pub gw: Vec<T>,
    pub gb: Vec<T>,
    x_cache: Vec<T>,
    batch: usize,
}

impl<T: Scalar> Linear<T> {
    pub fn new(f_in: usize, f_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            f_in,
            f_out,
            w: uniform_init(f_out * f_in, f_in, rng),
            b: uniform_init(f_out, f_in, rng),
            gw: vec![T::zero(); f_out * f_in],
            gb: vec![T::zero(); f_out],
            x_cache: Vec::new(),
            batch: 0,
        }
    }

    /// Zeroes weights and biases (identity-at-init STN heads).
    pub fn zero_params(&mut self) {
        self.w.iter_mut().for_each(|v| *v = T::zero());
        self.b.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.shape()[0];
        debug_assert_eq!(x.numel() / n, self.f_in);
        self.batch = n;
        self.x_cache.clear();
        self.x_cache.extend_from_slice(x.data());
        let mut y = Tensor::zeros(&[n, self.f_out]);
        // y = x (n x f_in) * W^T (f_in x f_out)
        gemm_rm_bt(n, self.f_in, self.f_out, T::one(), x.data(), &self.w, T::zero(), y.data_mut());
        for i in 0..n {
            for (o, bias) in self.b.iter().enumerate() {
                y.data_mut()[i * self.f_out + o] += *bias;
            }
        }
        y
    }

    pub fn backward(&mut self, gout: &Tensor<T>) -> Tensor<T> {
        self.backward_opts(gout, true)
    }

    pub fn backward_opts(&mut self, gout: &Tensor<T>, param_grads: bool) -> Tensor<T> {
        let n = self.batch;
        if param_grads {
            // gw += gout^T (f_out x n) * x (n x f_in)
            gemm_rm_at(self.f_out, n, self.f_in, T::one(), gout.data(), &self.x_cache, T::one(), &mut self.gw);
            for i in 0..n {
                for o in 0..self.f_out {
                    self.gb[o] += gout.data()[i * self.f_out + o];
                }
            }
        }
        let mut dx = Tensor::zeros(&[n, self.f_in]);
        // dx = gout (n x f_out) * W (f_out x f_in)
        gemm_rm(n, self.f_out, self.f_in, T::one(), gout.data(), &self.w, T::zero(), dx.data_mut());
        dx
    }

    pub fn zero_grad(&mut self) {
        self.gw.iter_mut().for_each(|v| *v = T::zero());
        self.gb.iter_mut().for_each(|v| *v = T::zero());
    }
}

// ---------------------------------------------------------------------------
// Normalization.
// ---------------------------------------------------------------------------

pub struct BatchNorm<T> {
    pub channels: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub g_gamma: Vec<T>,
    pub g_beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    momentum: f64,
    eps: f64,
    x_hat: Vec<T>,
    istd: Vec<T>,
    batch: usize,
    spatial: usize,
    trained_forward: bool,
}

impl<T: Scalar> BatchNorm<T> {
    fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            g_gamma: vec![T::zero(); channels],
            g_beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: 0.1,
            eps: 1e-5,
            x_hat: Vec::new(),
            istd: vec![T::zero(); channels],
            batch: 0,
            spatial: 0,
            trained_forward: false,
        }
    }

    fn forward(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        let n = x.shape()[0];
        let c = self.channels;
        let sp = x.numel() / (n * c);
        self.batch = n;
        self.spatial = sp;
        self.trained_forward = train;
        let m = (n * sp) as f64;
        let mut y = Tensor::zeros(x.shape());
        self.x_hat.resize(x.numel(), T::zero());
        for ch in 0..c {
            let (mean, istd) = if train {
                let mut sum = 0.0f64;
                let mut sq = 0.0f64;
                for i in 0..n {
                    for v in &x.sample(i)[ch * sp..(ch + 1) * sp] {
                        let f = v.as_f64();
                        sum += f;
                        sq += f * f;
                    }
                }
                let mean = sum / m;
                let var = (sq / m - mean * mean).max(0.0);
                let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
                self.running_mean[ch] =
                    T::c(self.running_mean[ch].as_f64() * (1.0 - self.momentum) + mean * self.momentum);
                self.running_var[ch] =
                    T::c(self.running_var[ch].as_f64() * (1.0 - self.momentum) + unbiased * self.momentum);
                (mean, 1.0 / (var + self.eps).sqrt())
            } else {
                (
                    self.running_mean[ch].as_f64(),
                    1.0 / (self.running_var[ch].as_f64() + self.eps).sqrt(),
                )
            };
            self.istd[ch] = T::c(istd);
            let g = self.gamma[ch];
            let b = self.beta[ch];
            let mean_t = T::c(mean);
            let istd_t = T::c(istd);
            for i in 0..n {
                let base = i * c * sp + ch * sp;
                let xs = &x.data()[base..base + sp];
                let xh_dst = &mut self.x_hat[base..base + sp];
                let y_dst = &mut y.data_mut()[base..base + sp];
                for j in 0..sp {
                    let xh = (xs[j] - mean_t) * istd_t;
                    xh_dst[j] = xh;
                    y_dst[j] = g * xh + b;
                }
            }
        }
        y
    }

    fn backward(&mut self, gout: &Tensor<T>, param_grads: bool) -> Tensor<T> {
        let n = self.batch;
        let c = self.channels;
        let sp = self.spatial;
        let m = (n * sp) as f64;
        let mut dx = Tensor::zeros(gout.shape());
        for ch in 0..c {
            let mut sum_dy = 0.0f64;
            let mut sum_dy_xhat = 0.0f64;
            for i in 0..n {
                let base = i * c * sp + ch * sp;
                for j in 0..sp {
                    let dy = gout.data()[base + j].as_f64();
                    sum_dy += dy;
                    sum_dy_xhat += dy * self.x_hat[base + j].as_f64();
                }
            }
            if param_grads {
                self.g_beta[ch] += T::c(sum_dy);
                self.g_gamma[ch] += T::c(sum_dy_xhat);
            }
            let g = self.gamma[ch].as_f64();
            let istd = self.istd[ch].as_f64();
            if self.trained_forward {
                let kf = T::c(g * istd / m);
                let m_t = T::c(m);
                let sum_dy_t = T::c(sum_dy);
                let sum_dy_xhat_t = T::c(sum_dy_xhat);
                for i in 0..n {
                    let base = i * c * sp + ch * sp;
                    let gs = &gout.data()[base..base + sp];
                    let xh = &self.x_hat[base..base + sp];
                    let dst = &mut dx.data_mut()[base..base + sp];
                    for j in 0..sp {
                        dst[j] = kf * (m_t * gs[j] - sum_dy_t - xh[j] * sum_dy_xhat_t);
                    }
                }
            } else {
                let k_eval = T::c(g * istd);
                for i in 0..n {
                    let base = i * c * sp + ch * sp;
                    for j in 0..sp {
                        dx.data_mut()[base + j] = gout.data()[base + j] * k_eval;
                    }
                }
            }
        }
        dx
    }

    fn zero_grad(&mut self) {
        self.g_gamma.iter_mut().for_each(|v| *v = T::zero());
        self.g_beta.iter_mut().for_each(|v| *v = T::zero());
    }
}

/// Instance normalization: per-sample, per-channel statistics over the
/// spatial extent; no affine parameters, statistics recomputed in eval too.
pub struct InstanceNorm<T> {
    channels: usize,
    eps: f64,
    x_hat: Vec<T>,
    istd: Vec<T>,
    batch: usize,
    spatial: usize,
}

impl<T: Scalar> InstanceNorm<T> {
    fn new(channels: usize) -> Self {
        Self {
            channels,
            eps: 1e-5,
            x_hat: Vec::new(),
            istd: Vec::new(),
            batch: 0,
            spatial: 0,
        }
    }

    fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let n = x.shape()[0];
        let c = self.channels;
        let sp = x.numel() / (n * c);
        self.batch = n;
        self.spatial = sp;
        self.x_hat.resize(x.numel(), T::zero());
        self.istd.resize(n * c, T::zero());
        let m = sp as f64;
        let mut y = Tensor::zeros(x.shape());
        for i in 0..n {
            for ch in 0..c {
                let base = i * c * sp + ch * sp;
                let mut sum = 0.0;
                let mut sq = 0.0;
                for j in 0..sp {
                    let f = x.data()[base + j].as_f64();
                    sum += f;
                    sq += f * f;
                }
                let mean = sum / m;
                let var = (sq / m - mean * mean).max(0.0);
                let istd = 1.0 / (var + self.eps).sqrt();
                self.istd[i * c + ch] = T::c(istd);
                let mean_t = T::c(mean);
                let istd_t = T::c(istd);
                let xs = &x.data()[base..base + sp];
                let xh_dst = &mut self.x_hat[base..base + sp];
                let y_dst = &mut y.data_mut()[base..base + sp];
                for j in 0..sp {
                    let xh = (xs[j] - mean_t) * istd_t;
                    xh_dst[j] = xh;
                    y_dst[j] = xh;
                }
            }
        }
        y
    }

    fn backward(&self, gout: &Tensor<T>) -> Tensor<T> {
        let n = self.batch;
        let c = self.channels;
        let sp = self.spatial;
        let m = sp as f64;
        let mut dx = Tensor::zeros(gout.shape());
        for i in 0..n {
            for ch in 0..c {
                let base = i * c * sp + ch * sp;
                let mut sum_dy = 0.0;
                let mut sum_dy_xhat = 0.0;
                for j in 0..sp {
                    let dy = gout.data()[base + j].as_f64();
                    sum_dy += dy;
                    sum_dy_xhat += dy * self.x_hat[base + j].as_f64();
                }
                let istd = self.istd[i * c + ch].as_f64();
                let kf = T::c(istd / m);
                let m_t = T::c(m);
                let sum_dy_t = T::c(sum_dy);
                let sum_dy_xhat_t = T::c(sum_dy_xhat);
                let gs = &gout.data()[base..base + sp];
                let xh = &self.x_hat[base..base + sp];
                let dst = &mut dx.data_mut()[base..base + sp];
                for j in 0..sp {
                    dst[j] = kf * (m_t * gs[j] - sum_dy_t - xh[j] * sum_dy_xhat_t);
                }
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Dropout and activations.
// ---------------------------------------------------------------------------

struct Dropout<T> {
    keep: f64,
    mask: Vec<T>,
    applied: bool,
}

impl<T: Scalar> Dropout<T> {
    fn new(keep: f64) -> Self {
        Self {
            keep,
            mask: Vec::new(),
            applied: false,
        }
    }

    fn forward(&mut self, x: &mut Tensor<T>, ctx: &mut FwdCtx) {
        self.applied = ctx.train && self.keep < 1.0;
        if !self.applied {
            return;
        }
        let scale = T::c(1.0 / self.keep);
        self.mask.resize(x.numel(), T::zero());
        for (m, v) in self.mask.iter_mut().zip(x.data_mut().iter_mut()) {
            let keep = ctx.rng.random_range(0.0..1.0) < self.keep;
            *m = if keep { scale } else { T::zero() };
            *v *= *m;
        }
    }

    fn backward(&self, g: &mut Tensor<T>) {
        if !self.applied {
            return;
        }
        for (v, m) in g.data_mut().iter_mut().zip(self.mask.iter()) {
            *v *= *m;
        }
    }
}

struct Act<T> {
    kind: Activation,
    y: Vec<T>,
}

impl<T: Scalar> Act<T> {
    fn new(kind: Activation) -> Self {
        Self { kind, y: Vec::new() }
    }

    fn forward(&mut self, x: &mut Tensor<T>) {
        match self.kind {
            Activation::None => return,
            Activation::Relu => {
                for v in x.data_mut() {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            Activation::Tanh => {
                for v in x.data_mut() {
                    *v = v.tanh();
                }
            }
            Activation::Sigmoid => {
                for v in x.data_mut() {
                    *v = T::one() / (T::one() + (-*v).exp());
                }
            }
        }
        self.y.clear();
        self.y.extend_from_slice(x.data());
    }

    fn backward(&self, g: &mut Tensor<T>) {
        match self.kind {
            Activation::None => {}
            Activation::Relu => {
                for (v, y) in g.data_mut().iter_mut().zip(self.y.iter()) {
                    if *y <= T::zero() {
                        *v = T::zero();
                    }
                }
            }
            Activation::Tanh => {
                for (v, y) in g.data_mut().iter_mut().zip(self.y.iter()) {
                    *v *= T::one() - *y * *y;
                }
            }
            Activation::Sigmoid => {
                for (v, y) in g.data_mut().iter_mut().zip(self.y.iter()) {
                    *v *= *y * (T::one() - *y);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Block: one layer-table row (op + norm + dropout + activation).
// ---------------------------------------------------------------------------

enum Op<T> {
    Conv(Conv<T>),
    Up(Upsample<T>, Conv<T>),
    Pool(MaxPool<T>),
    Linear(Linear<T>),
}

enum NormOp<T> {
    Batch(BatchNorm<T>),
    Instance(InstanceNorm<T>),
}

pub struct Block<T> {
    #[allow(dead_code)]
    spec: LayerSpec,
    op: Op<T>,
    norm: Option<NormOp<T>>,
    dropout: Option<Dropout<T>>,
    act: Act<T>,
}

impl<T: Scalar> Block<T> {
    /// `in_shape`/`out_shape` are `[C, spatial..]` without the batch axis.
    pub fn build(
        spec: &LayerSpec,
        dim: usize,
        in_shape: &[usize],
        out_shape: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let (c_in, in_spatial) = (in_shape[0], &in_shape[1..]);
        let op = match spec.kind {
            LayerKind::Conv => Op::Conv(Conv::new(
                dim,
                c_in,
                spec.channels_out,
                spec.kernel,
                spec.stride,
                spec.padding,
                in_spatial,
                rng,
            )?),
            LayerKind::UpsampleConv => {
                let up = Upsample::new(c_in, in_spatial);
                let up_spatial: Vec<usize> = in_spatial.iter().map(|&v| v * 2).collect();
                let conv = Conv::new(
                    dim,
                    c_in,
                    spec.channels_out,
                    spec.kernel,
                    spec.stride,
                    spec.padding,
                    &up_spatial,
                    rng,
                )?;
                Op::Up(up, conv)
            }
            LayerKind::MaxPool => Op::Pool(MaxPool::new(
                c_in,
                spec.kernel,
                spec.stride,
                spec.padding,
                in_spatial,
            )?),
            LayerKind::Linear => {
                let f_in: usize = in_shape.iter().product();
                Op::Linear(Linear::new(f_in, spec.channels_out, rng))
            }
        };
        let norm = match spec.norm {
            Norm::None => None,
            Norm::Batch => Some(NormOp::Batch(BatchNorm::new(out_shape[0]))),
            Norm::Instance => Some(NormOp::Instance(InstanceNorm::new(out_shape[0]))),
        };
        Ok(Self {
            spec: spec.clone(),
            op,
            norm,
            dropout: spec.dropout_keep.map(Dropout::new),
            act: Act::new(spec.activation),
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, ctx: &mut FwdCtx) -> Tensor<T> {
        let mut y = match &mut self.op {
            Op::Conv(c) => c.forward(x),
            Op::Up(u, c) => {
                let up = u.forward(x);
                c.forward(&up)
            }
            Op::Pool(p) => p.forward(x),
            Op::Linear(l) => {
                let n = x.shape()[0];
                let flat = x.clone().reshaped(&[n, x.numel() / n]).expect("flatten");
                l.forward(&flat)
            }
        };
        if let Some(norm) = &mut self.norm {
            y = match norm {
                NormOp::Batch(bn) => bn.forward(&y, ctx.train),
                NormOp::Instance(inorm) => inorm.forward(&y),
            };
        }
        if let Some(d) = &mut self.dropout {
            d.forward(&mut y, ctx);
        }
        self.act.forward(&mut y);
        y
    }

    pub fn backward(&mut self, gout: &Tensor<T>) -> Tensor<T> {
        self.backward_opts(gout, true)
    }

    /// Backward with optional parameter-gradient accumulation; skipping it
    /// saves the weight-gradient GEMMs when only the input gradient is
    /// needed (generator updates through a frozen discriminator).
    pub fn backward_opts(&mut self, gout: &Tensor<T>, param_grads: bool) -> Tensor<T> {
        let mut g = gout.clone();
        self.act.backward(&mut g);
        if let Some(d) = &self.dropout {
            d.backward(&mut g);
        }
        if let Some(norm) = &mut self.norm {
            g = match norm {
                NormOp::Batch(bn) => bn.backward(&g, param_grads),
                NormOp::Instance(inorm) => inorm.backward(&g),
            };
        }
        match &mut self.op {
            Op::Conv(c) => c.backward_opts(&g, param_grads),
            Op::Up(u, c) => {
                let dup = c.backward_opts(&g, param_grads);
                u.backward(&dup)
            }
            Op::Pool(p) => p.backward(&g),
            Op::Linear(l) => l.backward_opts(&g, param_grads),
        }
    }

    pub fn zero_grad(&mut self) {
        match &mut self.op {
            Op::Conv(c) => c.zero_grad(),
            Op::Up(_, c) => c.zero_grad(),
            Op::Pool(_) => {}
            Op::Linear(l) => l.zero_grad(),
        }
        if let Some(NormOp::Batch(bn)) = &mut self.norm {
            bn.zero_grad();
        }
    }

    /// Visits `(suffix, values, grads)` for every trainable parameter slot,
    /// in a stable order.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Vec<T>, &mut Vec<T>)) {
        match &mut self.op {
            Op::Conv(c) => {
                f("w", &mut c.w, &mut c.gw);
                f("b", &mut c.b, &mut c.gb);
            }
            Op::Up(_, c) => {
                f("w", &mut c.w, &mut c.gw);
                f("b", &mut c.b, &mut c.gb);
            }
            Op::Pool(_) => {}
            Op::Linear(l) => {
                f("w", &mut l.w, &mut l.gw);
                f("b", &mut l.b, &mut l.gb);
            }
        }
        if let Some(NormOp::Batch(bn)) = &mut self.norm {
            f("gamma", &mut bn.gamma, &mut bn.g_gamma);
            f("beta", &mut bn.beta, &mut bn.g_beta);
        }
    }

    /// Visits non-trainable state (batch-norm running stats) for checkpoints.
    pub fn visit_state(&mut self, f: &mut dyn FnMut(&str, &mut Vec<T>)) {
        if let Some(NormOp::Batch(bn)) = &mut self.norm {
            f("running_mean", &mut bn.running_mean);
            f("running_var", &mut bn.running_var);
        }
    }

    /// Zeroes the op's weights/biases (identity-init heads).
    pub fn zero_op_params(&mut self) {
        match &mut self.op {
            Op::Conv(c) => {
                c.w.iter_mut().for_each(|v| *v = T::zero());
                c.b.iter_mut().for_each(|v| *v = T::zero());
            }
            Op::Up(_, c) => {
                c.w.iter_mut().for_each(|v| *v = T::zero());
                c.b.iter_mut().for_each(|v| *v = T::zero());
            }
            Op::Linear(l) => l.zero_params(),
            Op::Pool(_) => {}
        }
    }
}
