//! Morphological machinery for the synthetic digit domains: exact Euclidean
//! distance transform, Zhang-Suen thinning, stroke-thickness control, shear,
//! local swelling, and fracture erasure.
//!
//! Images here are single-channel row-major `f32` grids in the `[0, 1]`
//! generation range; the domain builder normalizes to `[-1, 1]` at the end.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const BINARIZE_THRESHOLD: f32 = 0.5;

#[derive(Clone, Debug)]
pub struct Grid2 {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f32>,
}

impl Grid2 {
    pub fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    pub fn from_vec(w: usize, h: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), w * h);
        Self { w, h, data }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    /// Bilinear sample at continuous coordinates, zero outside.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let mut acc = 0.0;
        for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
            let yy = y0 + dy;
            if yy < 0 || yy >= self.h as isize {
                continue;
            }
            for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                let xx = x0 + dx;
                if xx < 0 || xx >= self.w as isize {
                    continue;
                }
                acc += wx * wy * self.data[yy as usize * self.w + xx as usize] as f64;
            }
        }
        acc
    }
}

pub fn binarize(img: &Grid2, thr: f32) -> Vec<bool> {
    img.data.iter().map(|&v| v >= thr).collect()
}

/// Stand-in for infinity that keeps the parabola intersections finite.
const DT_INF: f64 = 1e12;

/// 1D squared-distance transform (Felzenszwalb-Huttenlocher parabolas).
fn dt1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let sep = |q: usize, p: usize| -> f64 {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = sep(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = sep(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        out[q] = (q as f64 - p as f64).powi(2) + f[p];
    }
}

/// Exact Euclidean distance from every cell to the nearest seed cell.
pub fn edt_from_seeds(seeds: &[bool], w: usize, h: usize) -> Vec<f64> {
    let inf = DT_INF;
    let mut d: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { inf }).collect();
    let mut col = vec![0.0f64; h];
    let mut col_out = vec![0.0f64; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = d[y * w + x];
        }
        dt1d(&col, &mut col_out);
        for y in 0..h {
            d[y * w + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0f64; w];
    for y in 0..h {
        dt1d(&d[y * w..(y + 1) * w].to_vec(), &mut row_out);
        for x in 0..w {
            d[y * w + x] = row_out[x].sqrt();
        }
    }
    d
}

/// Number of 8-connected foreground components.
pub fn component_count(mask: &[bool], w: usize, h: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if mask[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
    }
    count
}

/// Zhang-Suen thinning to a 1-px skeleton. Outside the grid counts as
/// background.
pub fn skeletonize(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut m = mask.to_vec();
    let at = |m: &[bool], x: isize, y: isize| -> bool {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            false
        } else {
            m[y as usize * w + x as usize]
        }
    };
    loop {
        let mut changed = false;
        for phase in 0..2 {
            let mut to_clear = Vec::new();
            for y in 0..h as isize {
                for x in 0..w as isize {
                    if !at(&m, x, y) {
                        continue;
                    }
                    // neighbors p2..p9 clockwise from north
                    let p = [
                        at(&m, x, y - 1),
                        at(&m, x + 1, y - 1),
                        at(&m, x + 1, y),
                        at(&m, x + 1, y + 1),
                        at(&m, x, y + 1),
                        at(&m, x - 1, y + 1),
                        at(&m, x - 1, y),
                        at(&m, x - 1, y - 1),
                    ];
                    let b: usize = p.iter().map(|&v| v as usize).sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let mut a = 0;
                    for i in 0..8 {
                        if !p[i] && p[(i + 1) % 8] {
                            a += 1;
                        }
                    }
                    if a != 1 {
                        continue;
                    }
                    let cond = if phase == 0 {
                        (!p[0] || !p[2] || !p[4]) && (!p[2] || !p[4] || !p[6])
                    } else {
                        (!p[0] || !p[2] || !p[6]) && (!p[0] || !p[4] || !p[6])
                    };
                    if cond {
                        to_clear.push(y as usize * w + x as usize);
                    }
                }
            }
            if !to_clear.is_empty() {
                changed = true;
                for idx in to_clear {
                    m[idx] = false;
                }
            }
        }
        if !changed {
            return m;
        }
    }
}

/// Stroke thickness: 2x the mean distance-transform value over the
/// morphological skeleton.
///
/// The distance field is evaluated on a 4x-upsampled binarization with the
/// half-pixel center offset removed, so the value tracks the true (sub-pixel)
/// half-width of the anti-aliased stroke instead of the nearest
/// background-pixel center.
pub fn measure_thickness(img: &Grid2) -> Result<f64> {
    let mask = binarize(img, BINARIZE_THRESHOLD);
    if !mask.iter().any(|&v| v) {
        return Err(Error::Degenerate("empty foreground".into()));
    }
    let skel = skeletonize(&mask, img.w, img.h);
    let scale = 4usize;
    let (fw, fh) = (img.w * scale, img.h * scale);
    let mut fine_bg = vec![false; fw * fh];
    for fy in 0..fh {
        let sy = (fy as f64 + 0.5) / scale as f64 - 0.5;
        for fx in 0..fw {
            let sx = (fx as f64 + 0.5) / scale as f64 - 0.5;
            fine_bg[fy * fw + fx] = img.sample(sx, sy) < BINARIZE_THRESHOLD as f64;
        }
    }
    let dist = edt_from_seeds(&fine_bg, fw, fh);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &on) in skel.iter().enumerate() {
        if !on {
            continue;
        }
        let (x, y) = (i % img.w, i / img.w);
        let (fx, fy) = (x * scale + scale / 2, y * scale + scale / 2);
        let d = (dist[fy * fw + fx] - 0.5).max(0.0) / scale as f64;
        sum += d;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("skeleton vanished".into()));
    }
    Ok(2.0 * sum / n as f64)
}

/// Separable Gaussian blur, sigma 0.5, radius 2.
pub fn gaussian_smooth_05(img: &Grid2) -> Grid2 {
    let sigma = 0.5f64;
    let mut k = [0.0f64; 5];
    for (i, kv) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *kv = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let sum: f64 = k.iter().sum();
    for kv in k.iter_mut() {
        *kv /= sum;
    }
    let (w, h) = (img.w, img.h);
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = x as isize + i as isize - 2;
                if xx >= 0 && xx < w as isize {
                    acc += kv * img.data[y * w + xx as usize] as f64;
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = Grid2::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = y as isize + i as isize - 2;
                if yy >= 0 && yy < h as isize {
                    acc += kv * tmp[yy as usize * w + x];
                }
            }
            out.data[y * w + x] = acc.clamp(0.0, 1.0) as f32;
        }
    }
    out
}

/// Signed distance to the binarized stroke boundary: negative inside.
fn signed_distance(mask: &[bool], w: usize, h: usize) -> Vec<f64> {
    let fg_dist = edt_from_seeds(mask, w, h); // distance to nearest fg, 0 inside
    let bg: Vec<bool> = mask.iter().map(|&v| !v).collect();
    let bg_dist = edt_from_seeds(&bg, w, h); // distance to nearest bg, 0 outside
    (0..mask.len())
        .map(|i| if mask[i] { -(bg_dist[i] - 0.5) } else { fg_dist[i] - 0.5 })
        .collect()
}

/// Rescales the stroke width to `target_px` (the spec's skeleton measure),
/// via signed-distance dilation/erosion plus 0.5 px Gaussian smoothing,
/// iterating on the measured value.
pub fn set_stroke_thickness(img: &Grid2, target_px: f64) -> Result<Grid2> {
    if !(1.0..=8.0).contains(&target_px) {
        return Err(Error::Precondition(format!(
            "target thickness {target_px} outside [1, 8]"
        )));
    }
    let mask = binarize(img, BINARIZE_THRESHOLD);
    if !mask.iter().any(|&v| v) {
        return Err(Error::Degenerate("empty foreground".into()));
    }
    let measured = measure_thickness(img)?;
    if (measured - target_px).abs() <= 0.25 {
        return Ok(img.clone());
    }
    let components = component_count(&mask, img.w, img.h);
    let sd = signed_distance(&mask, img.w, img.h);
    let mut delta = (target_px - measured) / 2.0;
    let mut best: Option<(f64, Grid2)> = None;
    for _ in 0..6 {
        let mut out = Grid2::new(img.w, img.h);
        for i in 0..sd.len() {
            out.data[i] = ((0.5 + delta - sd[i]) as f32).clamp(0.0, 1.0);
        }
        let out = gaussian_smooth_05(&out);
        match measure_thickness(&out) {
            Ok(m) => {
                let err = (m - target_px).abs();
                let keep = match &best {
                    Some((e, _)) => err < *e,
                    None => true,
                };
                if keep {
                    best = Some((err, out));
                }
                if err <= 0.25 {
                    break;
                }
                delta += (target_px - m) / 2.0;
            }
            Err(_) => {
                // overshoot eroded the digit away; back off
                delta += 0.5;
            }
        }
    }
    let (err, out) = best.ok_or_else(|| {
        Error::Degenerate(format!(
            "thickness target {target_px} unreachable (skeleton vanished)"
        ))
    })?;
    if err > 0.5 {
        return Err(Error::Degenerate(format!(
            "thickness target {target_px} missed by {err:.2} px"
        )));
    }
    let out_mask = binarize(&out, BINARIZE_THRESHOLD);
    if component_count(&out_mask, img.w, img.h) != components {
        return Err(Error::Degenerate(
            "thickness change altered digit topology".into(),
        ));
    }
    Ok(out)
}

/// Horizontal shear about the image center:
/// `out(x, y) = in(x - (y - c_y) tan(angle), y)` with linear interpolation.
pub fn apply_slant(img: &Grid2, angle_deg: f64) -> Result<Grid2> {
    if angle_deg.abs() > 45.0 {
        return Err(Error::Precondition(format!(
            "slant angle {angle_deg} outside [-45, 45]"
        )));
    }
    let t = angle_deg.to_radians().tan();
    let cy = (img.h as f64 - 1.0) / 2.0;
    let mut out = Grid2::new(img.w, img.h);
    for y in 0..img.h {
        let shift = (y as f64 - cy) * t;
        for x in 0..img.w {
            out.data[y * img.w + x] = img.sample(x as f64 - shift, y as f64) as f32;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SwellParams {
    /// (x, y) center on the stroke.
    pub center: (f64, f64),
    pub radius: f64,
    pub strength: f64,
}

#[derive(Clone, Debug)]
pub struct FractureParams {
    /// (x, y) center on the stroke.
    pub center: (f64, f64),
    /// Unit direction of the erasure segment.
    pub dir: (f64, f64),
    pub half_len: f64,
    pub width: f64,
}

fn distance_to_stroke(img: &Grid2, p: (f64, f64)) -> f64 {
    let mask = binarize(img, BINARIZE_THRESHOLD);
    let dist = edt_from_seeds(&mask, img.w, img.h);
    let x = p.0.round().clamp(0.0, img.w as f64 - 1.0) as usize;
    let y = p.1.round().clamp(0.0, img.h as f64 - 1.0) as usize;
    dist[y * img.w + x]
}

/// Radially magnifies the region inside `radius` around the center: output
/// pixels at distance `r` sample the input at `r (r/R)^(strength-1)`,
/// producing a local bulge. Pixels outside the radius are copied unchanged.
pub fn apply_swelling(img: &Grid2, p: &SwellParams) -> Result<Grid2> {
    if !(p.strength > 1.0 && p.strength <= 4.0) {
        return Err(Error::Precondition(format!(
            "swell strength {} outside (1, 4]",
            p.strength
        )));
    }
    if !(2.0..=7.0).contains(&p.radius) {
        return Err(Error::Precondition(format!(
            "swell radius {} outside [2, 7]",
            p.radius
        )));
    }
    if distance_to_stroke(img, p.center) > 1.0 {
        return Err(Error::Precondition("swell center off-stroke".into()));
    }
    let mut out = img.clone();
    let (cx, cy) = p.center;
    for y in 0..img.h {
        for x in 0..img.w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let r = (dx * dx + dy * dy).sqrt();
            if r >= p.radius || r == 0.0 {
                continue;
            }
            let scale = (r / p.radius).powf(p.strength - 1.0);
            let sx = cx + dx * scale;
            let sy = cy + dy * scale;
            out.data[y * img.w + x] = img.sample(sx, sy) as f32;
        }
    }
    Ok(out)
}

/// Erases an anti-aliased band of `width` px along a segment centered on the
/// stroke; a zero-length segment is a no-op.
pub fn apply_fracture(img: &Grid2, p: &FractureParams) -> Result<Grid2> {
    if p.width > 2.0 {
        return Err(Error::Precondition(format!(
            "fracture width {} exceeds 2 px",
            p.width
        )));
    }
    if p.half_len <= 0.0 {
        return Ok(img.clone());
    }
    if distance_to_stroke(img, p.center) > 1.0 {
        return Err(Error::Precondition("fracture segment off-stroke".into()));
    }
    let (cx, cy) = p.center;
    let (dx, dy) = p.dir;
    let norm = (dx * dx + dy * dy).sqrt();
    if norm == 0.0 {
        return Ok(img.clone());
    }
    let (ux, uy) = (dx / norm, dy / norm);
    let mut out = img.clone();
    for y in 0..img.h {
        for x in 0..img.w {
            let rx = x as f64 - cx;
            let ry = y as f64 - cy;
            let along = rx * ux + ry * uy;
            let perp = (-rx * uy + ry * ux).abs();
            let cov_along = (p.half_len + 0.5 - along.abs()).clamp(0.0, 1.0);
            let cov_perp = (p.width / 2.0 + 0.5 - perp).clamp(0.0, 1.0);
            let cov = (cov_along * cov_perp) as f32;
            out.data[y * img.w + x] *= 1.0 - cov;
        }
    }
    Ok(out)
}

/// Skeleton pixel indices of the binarized image.
pub fn skeleton_pixels(img: &Grid2) -> Vec<(usize, usize)> {
    let mask = binarize(img, BINARIZE_THRESHOLD);
    let skel = skeletonize(&mask, img.w, img.h);
    (0..skel.len())
        .filter(|&i| skel[i])
        .map(|i| (i % img.w, i / img.w))
        .collect()
}

/// Local stroke tangent at a skeleton point, from the principal axis of the
/// skeleton neighborhood; falls back to horizontal for isolated points.
fn local_tangent(skel: &[(usize, usize)], center: (f64, f64)) -> (f64, f64) {
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    let mut n = 0.0;
    for &(x, y) in skel {
        let ddx = x as f64 - center.0;
        let ddy = y as f64 - center.1;
        if ddx * ddx + ddy * ddy <= 9.0 {
            sx += ddx;
            sy += ddy;
            sxx += ddx * ddx;
            sxy += ddx * ddy;
            syy += ddy * ddy;
            n += 1.0;
        }
    }
    if n < 2.0 {
        return (1.0, 0.0);
    }
    let mx = sx / n;
    let my = sy / n;
    let cxx = sxx / n - mx * mx;
    let cxy = sxy / n - mx * my;
    let cyy = syy / n - my * my;
    // principal eigenvector of [[cxx, cxy], [cxy, cyy]]
    let tr = cxx + cyy;
    let det = cxx * cyy - cxy * cxy;
    let l1 = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
    let (vx, vy) = if cxy.abs() > 1e-12 {
        (l1 - cyy, cxy)
    } else if cxx >= cyy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (vx * vx + vy * vy).sqrt();
    if norm < 1e-12 {
        (1.0, 0.0)
    } else {
        (vx / norm, vy / norm)
    }
}

/// Samples swelling parameters: center uniform on the skeleton, radius
/// uniform in [3, 7] (clipped to stay on-canvas), strength 3.
pub fn sample_swell_params(img: &Grid2, rng: &mut ChaCha8Rng) -> Result<SwellParams> {
    let skel = skeleton_pixels(img);
    if skel.is_empty() {
        return Err(Error::Degenerate("no skeleton to place swelling on".into()));
    }
    let &(x, y) = &skel[rng.random_range(0..skel.len())];
    let border = (x.min(img.w - 1 - x).min(y).min(img.h - 1 - y)) as f64;
    let radius = rng
        .random_range(3.0f64..7.0)
        .min((border + 1.0).max(2.0))
        .max(2.0);
    Ok(SwellParams {
        center: (x as f64, y as f64),
        radius,
        strength: 3.0,
    })
}

/// Samples a fracture perpendicular to the local stroke tangent, preferring
/// candidate locations whose erasure actually splits a component (a cut
/// through a closed loop leaves it connected, so candidates are retried).
pub fn sample_fracture_params(img: &Grid2, rng: &mut ChaCha8Rng) -> Result<FractureParams> {
    let skel = skeleton_pixels(img);
    if skel.is_empty() {
        return Err(Error::Degenerate("no skeleton to fracture".into()));
    }
    let mask = binarize(img, BINARIZE_THRESHOLD);
    let bg: Vec<bool> = mask.iter().map(|&v| !v).collect();
    let dist = edt_from_seeds(&bg, img.w, img.h);
    let before = component_count(&mask, img.w, img.h);
    // Try skeleton points in a shuffled order until one cut actually severs
    // a component; a single cut through a closed loop never does, so loop
    // digits rely on their pen tails.
    let order = crate::rng::shuffled_indices(skel.len(), rng);
    let mut fallback = None;
    for &si in &order {
        let (x, y) = skel[si];
        let center = (x as f64, y as f64);
        let (tx, ty) = local_tangent(&skel, center);
        let dir = (-ty, tx);
        let local_radius = dist[y * img.w + x].max(0.8);
        let half_len = (2.0 * local_radius + 1.5).min(7.0);
        let params = FractureParams {
            center,
            dir,
            half_len,
            width: 1.5,
        };
        if fallback.is_none() {
            fallback = Some(params.clone());
        }
        let trial = apply_fracture(img, &params)?;
        let after = component_count(&binarize(&trial, BINARIZE_THRESHOLD), img.w, img.h);
        if after > before {
            return Ok(params);
        }
    }
    Ok(fallback.expect("at least one candidate"))
}

/// Moment-based slant estimate in degrees: `atan(cov(x,y) / var(y))` of the
/// intensity distribution.
pub fn estimate_slant_deg(img: &Grid2) -> f64 {
    let mut m = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for y in 0..img.h {
        for x in 0..img.w {
            let v = img.data[y * img.w + x] as f64;
            m += v;
            mx += v * x as f64;
            my += v * y as f64;
        }
    }
    if m <= 0.0 {
        return 0.0;
    }
    mx /= m;
    my /= m;
    let mut cxy = 0.0;
    let mut cyy = 0.0;
    for y in 0..img.h {
        for x in 0..img.w {
            let v = img.data[y * img.w + x] as f64;
            cxy += v * (x as f64 - mx) * (y as f64 - my);
            cyy += v * (y as f64 - my) * (y as f64 - my);
        }
    }
    if cyy <= 0.0 {
        return 0.0;
    }
    (cxy / cyy).atan().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Straight horizontal soft bar of a given nominal width.
    fn bar(width: f64) -> Grid2 {
        let mut g = Grid2::new(28, 28);
        let cy = 13.5;
        for y in 0..28 {
            for x in 2..26 {
                let d = (y as f64 - cy).abs();
                g.data[y * 28 + x] = ((width / 2.0 + 0.5 - d).clamp(0.0, 1.0)) as f32;
            }
        }
        g
    }

    #[test]
    fn edt_of_single_seed_is_euclidean() {
        let mut seeds = vec![false; 25];
        seeds[12] = true; // center of 5x5
        let d = edt_from_seeds(&seeds, 5, 5);
        assert_eq!(d[12], 0.0);
        assert!((d[0] - (8.0f64).sqrt()).abs() < 1e-9);
        assert!((d[13] - 1.0).abs() < 1e-9);
        assert!((d[24] - (8.0f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn component_count_sees_disconnected_strokes() {
        let mut mask = vec![false; 28 * 28];
        for y in 3..8 {
            mask[y * 28 + 4] = true;
        }
        for y in 15..20 {
            mask[y * 28 + 20] = true;
        }
        assert_eq!(component_count(&mask, 28, 28), 2);
    }

    #[test]
    fn skeleton_of_bar_is_thin_line() {
        let g = bar(5.0);
        let mask = binarize(&g, 0.5);
        let skel = skeletonize(&mask, 28, 28);
        let rows: std::collections::BTreeSet<usize> =
            (0..784).filter(|&i| skel[i]).map(|i| i / 28).collect();
        assert!(rows.len() <= 2, "bar skeleton spans rows {rows:?}");
    }

    #[test]
    fn thickness_measure_tracks_bar_width() {
        for target in [2.5, 5.0] {
            let g = bar(target);
            let m = measure_thickness(&g).unwrap();
            assert!(
                (m - target).abs() <= 0.8,
                "bar width {target}: measured {m}"
            );
        }
    }

    #[test]
    fn set_thickness_reaches_targets() {
        let g = bar(3.0);
        for target in [2.5, 5.0] {
            let out = set_stroke_thickness(&g, target).unwrap();
            let m = measure_thickness(&out).unwrap();
            assert!(
                (m - target).abs() <= 0.5,
                "target {target}: measured {m}"
            );
        }
    }

    #[test]
    fn set_thickness_is_near_fixed_point_at_measured_input() {
        let g = bar(3.0);
        let m = measure_thickness(&g).unwrap();
        let out = set_stroke_thickness(&g, m).unwrap();
        for (a, b) in out.data.iter().zip(g.data.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_image_is_degenerate() {
        let g = Grid2::new(28, 28);
        assert!(matches!(
            set_stroke_thickness(&g, 2.5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn zero_slant_is_identity() {
        let g = bar(3.0);
        let out = apply_slant(&g, 0.0).unwrap();
        for (a, b) in out.data.iter().zip(g.data.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn slant_moves_single_column_by_row_offsets() {
        let mut g = Grid2::new(28, 28);
        for y in 4..24 {
            g.data[y * 28 + 14] = 1.0;
        }
        let angle = 20.0f64;
        let out = apply_slant(&g, angle).unwrap();
        let t = angle.to_radians().tan();
        let cy = 13.5;
        for y in 6..22 {
            // center of mass of the row should sit at 14 + (y - cy) tan
            let mut m = 0.0;
            let mut mx = 0.0;
            for x in 0..28 {
                let v = out.data[y * 28 + x] as f64;
                m += v;
                mx += v * x as f64;
            }
            assert!(m > 0.0);
            let com = mx / m;
            let want = 14.0 + (y as f64 - cy) * t;
            assert!(
                (com - want).abs() < 0.15,
                "row {y}: com {com:.3} want {want:.3}"
            );
        }
    }

    #[test]
    fn slant_estimate_matches_applied_angle() {
        let mut g = Grid2::new(28, 28);
        for y in 4..24 {
            for x in 12..16 {
                g.data[y * 28 + x] = 1.0;
            }
        }
        for angle in [0.0, 10.0, 22.5] {
            let sheared = apply_slant(&g, angle).unwrap();
            let est = estimate_slant_deg(&sheared) - estimate_slant_deg(&g);
            assert!(
                (est - angle).abs() <= 5.0,
                "angle {angle}: estimated {est}"
            );
        }
    }

    #[test]
    fn swelling_grows_foreground_and_preserves_outside() {
        let g = bar(3.0);
        let p = SwellParams {
            center: (14.0, 13.5),
            radius: 5.0,
            strength: 3.0,
        };
        let out = apply_swelling(&g, &p).unwrap();
        let area_before: f32 = g.data.iter().sum();
        let area_after: f32 = out.data.iter().sum();
        assert!(area_after > area_before);
        for y in 0..28 {
            for x in 0..28 {
                let dx = x as f64 - 14.0;
                let dy = y as f64 - 13.5;
                if (dx * dx + dy * dy).sqrt() >= 5.0 {
                    let i = y * 28 + x;
                    assert!((out.data[i] - g.data[i]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn swelling_near_unit_strength_is_identity() {
        let g = bar(3.0);
        let p = SwellParams {
            center: (14.0, 13.5),
            radius: 5.0,
            strength: 1.0 + 1e-9,
        };
        let out = apply_swelling(&g, &p).unwrap();
        for (a, b) in out.data.iter().zip(g.data.iter()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn swell_center_off_stroke_is_rejected() {
        let g = bar(3.0);
        let p = SwellParams {
            center: (14.0, 2.0),
            radius: 4.0,
            strength: 3.0,
        };
        assert!(matches!(
            apply_swelling(&g, &p),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn fracture_splits_a_bar() {
        let g = bar(3.0);
        let p = FractureParams {
            center: (14.0, 13.5),
            dir: (0.0, 1.0),
            half_len: 4.0,
            width: 1.5,
        };
        let out = apply_fracture(&g, &p).unwrap();
        let before = component_count(&binarize(&g, 0.5), 28, 28);
        let after = component_count(&binarize(&out, 0.5), 28, 28);
        assert_eq!(before, 1);
        assert!(after >= 2);
    }

    #[test]
    fn zero_length_fracture_is_identity() {
        let g = bar(3.0);
        let p = FractureParams {
            center: (14.0, 13.5),
            dir: (0.0, 1.0),
            half_len: 0.0,
            width: 1.5,
        };
        let out = apply_fracture(&g, &p).unwrap();
        assert_eq!(out.data, g.data);
    }


    #[test]
    fn thickening_area_growth_matches_skeleton_dilation_oracle() {
        // Oracle: dilating the skeleton by r px covers the pixels within
        // distance r of it; the predicted area ratio between 5.0 px and
        // 2.5 px strokes is the ratio of those covers, averaged over digits.
        let corpus = crate::synth::glyph::generate_corpus(100, 21);
        let mut actual_ratio = 0.0;
        let mut oracle_ratio = 0.0;
        let mut n = 0.0;
        for d in &corpus {
            let thin = match set_stroke_thickness(&d.pixels, 2.5) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let thick = match set_stroke_thickness(&d.pixels, 5.0) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let count = |g: &Grid2| binarize(g, 0.5).iter().filter(|&&v| v).count() as f64;
            actual_ratio += count(&thick) / count(&thin);

            let mask = binarize(&d.pixels, BINARIZE_THRESHOLD);
            let skel = skeletonize(&mask, d.pixels.w, d.pixels.h);
            let dist = edt_from_seeds(&skel, d.pixels.w, d.pixels.h);
            let cover = |r: f64| dist.iter().filter(|&&v| v <= r).count() as f64;
            oracle_ratio += cover(2.5) / cover(1.25);
            n += 1.0;
        }
        actual_ratio /= n;
        oracle_ratio /= n;
        assert!(n >= 95.0, "too many degenerate glyphs ({n})");
        assert!(
            (actual_ratio - oracle_ratio).abs() / oracle_ratio < 0.15,
            "area growth {actual_ratio:.3} vs skeleton-dilation oracle {oracle_ratio:.3}"
        );
    }

    #[test]
    fn swelling_grows_area_on_random_digits() {
        use rand::SeedableRng;
        let corpus = crate::synth::glyph::generate_corpus(100, 33);
        let mut grown = 0;
        for (i, d) in corpus.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + i as u64);
            let p = sample_swell_params(&d.pixels, &mut rng).unwrap();
            let out = apply_swelling(&d.pixels, &p).unwrap();
            let before: f32 = d.pixels.data.iter().sum();
            let after: f32 = out.data.iter().sum();
            if after > before {
                grown += 1;
            }
        }
        assert_eq!(grown, 100, "swelling failed to grow area on {} digits", 100 - grown);
    }

    #[test]
    fn fracture_severs_at_least_95_of_100_random_digits() {
        use rand::SeedableRng;
        let corpus = crate::synth::glyph::generate_corpus(100, 47);
        let mut severed = 0;
        for (i, d) in corpus.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + i as u64);
            let p = sample_fracture_params(&d.pixels, &mut rng).unwrap();
            let out = apply_fracture(&d.pixels, &p).unwrap();
            let before = component_count(&binarize(&d.pixels, 0.5), 28, 28);
            let after = component_count(&binarize(&out, 0.5), 28, 28);
            if after > before {
                severed += 1;
            }
        }
        assert!(severed >= 95, "only {severed}/100 fractures severed the stroke");
    }

    #[test]
    fn fracture_sampler_prefers_severing_cuts() {
        let g = bar(3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_fracture_params(&g, &mut rng).unwrap();
        let out = apply_fracture(&g, &p).unwrap();
        assert!(
            component_count(&binarize(&out, 0.5), 28, 28)
                > component_count(&binarize(&g, 0.5), 28, 28)
        );
    }
}
