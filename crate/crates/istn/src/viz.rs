//! Figure rendering: grayscale sample tiles, signed difference images with a
//! diverging colormap, and deformation-field visualizations (arrow plot and
//! deformed grid overlay).

use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::spatial::DenseDisplacementField;
use crate::tensor::Tensor;

/// RGB canvas with simple drawing primitives.
pub struct Canvas {
    pub w: usize,
    pub h: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Canvas {
    pub fn new(w: usize, h: usize, fill: [u8; 3]) -> Self {
        Self {
            w,
            h,
            pixels: vec![fill; w * h],
        }
    }

    pub fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h {
            self.pixels[y as usize * self.w + x as usize] = c;
        }
    }

    /// Anti-alias-free line (supersampled endpoints are good enough for
    /// figure annotation).
    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), c: [u8; 3]) {
        let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let x = a.0 + (b.0 - a.0) * t;
            let y = a.1 + (b.1 - a.1) * t;
            self.put(x.round() as i64, y.round() as i64, c);
        }
    }

    pub fn arrow(&mut self, from: (f64, f64), delta: (f64, f64), c: [u8; 3]) {
        let to = (from.0 + delta.0, from.1 + delta.1);
        self.line(from, to, c);
        // arrowhead: two short back-swept segments
        let len = (delta.0 * delta.0 + delta.1 * delta.1).sqrt();
        if len > 1.0 {
            let (ux, uy) = (delta.0 / len, delta.1 / len);
            let head = 3.0f64.min(len * 0.4);
            for side in [-1.0, 1.0] {
                let hx = -ux * head + side * -uy * head * 0.6;
                let hy = -uy * head + side * ux * head * 0.6;
                self.line(to, (to.0 + hx, to.1 + hy), c);
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut img = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(self.w as u32, self.h as u32);
        for (i, px) in self.pixels.iter().enumerate() {
            img.put_pixel((i % self.w) as u32, (i / self.w) as u32, Rgb(*px));
        }
        img.save(path)
            .map_err(|e| Error::Format(format!("png encode failed: {e}")))
    }
}

fn gray(v: f64) -> [u8; 3] {
    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [g, g, g]
}

/// Symmetric blue-white-red map for signed values in [-scale, scale].
fn diverging(v: f64, scale: f64) -> [u8; 3] {
    if scale <= 0.0 {
        return [255, 255, 255];
    }
    let t = (v / scale).clamp(-1.0, 1.0);
    if t >= 0.0 {
        // white -> red
        let u = 1.0 - t;
        [255, (255.0 * u) as u8, (255.0 * u) as u8]
    } else {
        let u = 1.0 + t;
        [(255.0 * u) as u8, (255.0 * u) as u8, 255]
    }
}

/// Renders a single-channel image (intensities in [-1, 1]) upscaled by an
/// integer factor.
pub fn render_gray(img: &[f32], h: usize, w: usize, upscale: usize) -> Canvas {
    let mut c = Canvas::new(w * upscale, h * upscale, [0, 0, 0]);
    for y in 0..h * upscale {
        for x in 0..w * upscale {
            let v = img[(y / upscale) * w + x / upscale] as f64;
            let p = gray((v + 1.0) / 2.0);
            c.pixels[y * c.w + x] = p;
        }
    }
    c
}

/// Signed difference image with the diverging colormap, scaled to the max
/// absolute difference. Differences below numerical noise render flat white.
pub fn render_difference(diff: &[f32], h: usize, w: usize, upscale: usize) -> Canvas {
    let mut scale = diff.iter().fold(0.0f64, |m, &v| m.max(v.abs() as f64));
    if scale < 1e-4 {
        scale = 0.0;
    }
    let mut c = Canvas::new(w * upscale, h * upscale, [255, 255, 255]);
    for y in 0..h * upscale {
        for x in 0..w * upscale {
            let v = diff[(y / upscale) * w + x / upscale] as f64;
            c.pixels[y * c.w + x] = diverging(v, scale);
        }
    }
    c
}

/// Arrow start/delta pairs (pixel units at the upscaled resolution) for a 2D
/// displacement field, one arrow every `step` voxels.
pub fn quiver_arrows(
    field: &DenseDisplacementField<f32>,
    step: usize,
    upscale: usize,
) -> Vec<((f64, f64), (f64, f64))> {
    assert_eq!(field.dim, 2, "quiver plots are 2D");
    let (h, w) = (field.spatial[0], field.spatial[1]);
    let mut arrows = Vec::new();
    for y in (step / 2..h).step_by(step) {
        for x in (step / 2..w).step_by(step) {
            let v = &field.data[(y * w + x) * 2..(y * w + x) * 2 + 2];
            // normalized displacement -> pixels
            let dx = v[0] as f64 * (w as f64 - 1.0) / 2.0;
            let dy = v[1] as f64 * (h as f64 - 1.0) / 2.0;
            arrows.push((
                (x as f64 * upscale as f64, y as f64 * upscale as f64),
                (dx * upscale as f64, dy * upscale as f64),
            ));
        }
    }
    arrows
}

/// Arrow plot of a displacement field over a gray background image.
pub fn render_quiver(
    background: &[f32],
    field: &DenseDisplacementField<f32>,
    upscale: usize,
) -> Canvas {
    let (h, w) = (field.spatial[0], field.spatial[1]);
    let mut canvas = render_gray(background, h, w, upscale);
    for (from, delta) in quiver_arrows(field, 3, upscale) {
        canvas.arrow(from, delta, [255, 80, 40]);
    }
    canvas
}

/// Deformed-grid overlay: regular grid lines displaced by the field (the
/// positions a resampler would read from).
pub fn render_grid_overlay(field: &DenseDisplacementField<f32>, upscale: usize, step: usize) -> Canvas {
    assert_eq!(field.dim, 2);
    let (h, w) = (field.spatial[0], field.spatial[1]);
    let mut canvas = Canvas::new(w * upscale, h * upscale, [255, 255, 255]);
    let pos = |x: usize, y: usize| -> (f64, f64) {
        let v = &field.data[(y * w + x) * 2..(y * w + x) * 2 + 2];
        (
            (x as f64 + v[0] as f64 * (w as f64 - 1.0) / 2.0) * upscale as f64,
            (y as f64 + v[1] as f64 * (h as f64 - 1.0) / 2.0) * upscale as f64,
        )
    };
    let blue = [60, 90, 220];
    for y in (0..h).step_by(step) {
        for x in 0..w - 1 {
            canvas.line(pos(x, y), pos(x + 1, y), blue);
        }
    }
    for x in (0..w).step_by(step) {
        for y in 0..h - 1 {
            canvas.line(pos(x, y), pos(x, y + 1), blue);
        }
    }
    canvas
}

/// Tiles rows of images (each `[-1, 1]`, h x w) into one canvas with 2-px
/// separators; every row must have the same number of images.
pub fn render_tile_grid(rows: &[Vec<&[f32]>], h: usize, w: usize, upscale: usize) -> Result<Canvas> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Param("tile grid needs at least one image".into()));
    }
    let cols = rows[0].len();
    let sep = 2;
    let cw = w * upscale;
    let ch = h * upscale;
    let mut canvas = Canvas::new(
        cols * cw + (cols - 1) * sep,
        rows.len() * ch + (rows.len() - 1) * sep,
        [30, 30, 30],
    );
    for (r, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Shape("ragged tile grid".into()));
        }
        for (cidx, img) in row.iter().enumerate() {
            let tile = render_gray(img, h, w, upscale);
            let ox = cidx * (cw + sep);
            let oy = r * (ch + sep);
            for y in 0..ch {
                for x in 0..cw {
                    canvas.pixels[(oy + y) * canvas.w + ox + x] = tile.pixels[y * cw + x];
                }
            }
        }
    }
    Ok(canvas)
}

/// First channel of sample `i` of a `[N, 1, H, W]` tensor.
pub fn sample_image(t: &Tensor<f32>, i: usize) -> &[f32] {
    t.sample(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_files_have_declared_dimensions() {
        let dir = std::env::temp_dir().join("istn_viz_test");
        let img = vec![0.0f32; 28 * 28];
        let canvas = render_gray(&img, 28, 28, 4);
        let path = dir.join("gray.png");
        canvas.save(&path).unwrap();
        let loaded = image::open(&path).unwrap();
        assert_eq!(loaded.width(), 112);
        assert_eq!(loaded.height(), 112);
    }

    #[test]
    fn zero_difference_renders_uniform_white() {
        let diff = vec![0.0f32; 16];
        let c = render_difference(&diff, 4, 4, 1);
        assert!(c.pixels.iter().all(|&p| p == [255, 255, 255]));
    }

    #[test]
    fn quiver_of_affine_field_has_collinear_row_deltas() {
        // an affine displacement field is linear in position: along any
        // grid row, consecutive arrow deltas advance by a constant vector
        let (h, w) = (28usize, 28usize);
        let mut field = DenseDisplacementField::<f32>::zeros(&[h, w]);
        for y in 0..h {
            for x in 0..w {
                let nx = 2.0 * x as f32 / (w as f32 - 1.0) - 1.0;
                let ny = 2.0 * y as f32 / (h as f32 - 1.0) - 1.0;
                field.data[(y * w + x) * 2] = 0.1 * nx - 0.05 * ny + 0.02;
                field.data[(y * w + x) * 2 + 1] = 0.03 * nx + 0.07 * ny - 0.01;
            }
        }
        let arrows = quiver_arrows(&field, 3, 1);
        // group by rows (same y-start), check second differences vanish
        let mut rows: std::collections::BTreeMap<i64, Vec<(f64, f64)>> = Default::default();
        for (from, delta) in &arrows {
            rows.entry(from.1 as i64).or_default().push(*delta);
        }
        for (_, deltas) in rows {
            for win in deltas.windows(3) {
                let d2x = win[2].0 - 2.0 * win[1].0 + win[0].0;
                let d2y = win[2].1 - 2.0 * win[1].1 + win[0].1;
                assert!(d2x.abs() < 1e-4 && d2y.abs() < 1e-4, "non-affine arrows");
            }
        }
    }
}
