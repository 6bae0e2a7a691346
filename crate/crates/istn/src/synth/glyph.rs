//! Procedural digit glyphs: jittered polyline templates rendered as soft
//! anti-aliased strokes on a 28x28 canvas. The corpus stands in for scanned
//! handwriting when no IDX files are available; digits 0/8 carry short pen
//! tails so every glyph has at least one cut that disconnects it.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use super::morpho::Grid2;

pub const DIGIT_SIZE: usize = 28;

/// Template strokes per digit, as polylines in canvas coordinates (x right,
/// y down).
fn template(digit: u8) -> Vec<Vec<(f64, f64)>> {
    fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, n: usize) -> Vec<(f64, f64)> {
        (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64 * std::f64::consts::TAU;
                (cx + rx * t.cos(), cy + ry * t.sin())
            })
            .collect()
    }
    // Loops are drawn near-maximal for the canvas so their holes survive
    // thickening to 5 px strokes.
    match digit {
        0 => vec![
            ellipse(14.0, 14.0, 5.2, 7.6, 20),
            // pen-entry tail at the top right
            vec![(16.6, 7.2), (20.6, 2.8)],
        ],
        1 => vec![vec![(11.4, 9.0), (14.2, 5.8), (14.0, 22.2)]],
        2 => vec![vec![
            (9.6, 9.6),
            (10.3, 7.0),
            (12.0, 5.6),
            (14.2, 5.2),
            (16.4, 5.8),
            (17.9, 7.4),
            (18.4, 9.6),
            (17.4, 12.2),
            (14.8, 15.2),
            (11.8, 18.2),
            (9.4, 21.8),
            (18.6, 21.8),
        ]],
        3 => vec![vec![
            (9.8, 6.6),
            (12.2, 5.2),
            (15.2, 5.3),
            (17.6, 6.9),
            (17.9, 9.4),
            (15.9, 11.8),
            (13.4, 12.6),
            (16.1, 13.7),
            (18.3, 15.9),
            (18.1, 18.9),
            (16.0, 21.4),
            (12.8, 22.3),
            (9.8, 21.0),
        ]],
        // open-top four; the stem stays clear of the diagonal so 5 px
        // strokes cannot close a pocket between them
        4 => vec![
            vec![(14.8, 4.6), (7.6, 16.8), (20.6, 16.8)],
            vec![(17.8, 12.6), (17.8, 22.8)],
        ],
        5 => vec![vec![
            (17.6, 5.5),
            (10.6, 5.5),
            (10.1, 12.0),
            (13.0, 10.8),
            (16.1, 11.3),
            (18.1, 13.5),
            (18.3, 16.6),
            (16.5, 19.9),
            (13.0, 21.8),
            (9.9, 20.4),
        ]],
        6 => vec![vec![
            (17.2, 4.6),
            (13.8, 6.3),
            (11.4, 9.4),
            (9.9, 13.0),
            (9.6, 16.6),
            (10.8, 20.4),
            (14.2, 22.4),
            (17.4, 20.6),
            (18.5, 17.0),
            (16.7, 13.4),
            (13.0, 12.8),
            (10.2, 15.0),
        ]],
        7 => vec![vec![(9.4, 5.6), (18.6, 5.6), (12.4, 22.4)]],
        8 => vec![
            ellipse(14.0, 8.9, 4.4, 4.4, 16),
            ellipse(14.0, 17.7, 5.2, 5.2, 16),
            // small starting tail
            vec![(17.2, 6.0), (20.6, 2.4)],
        ],
        9 => vec![
            ellipse(13.4, 9.8, 4.7, 4.8, 16),
            vec![(18.1, 9.6), (18.0, 14.4), (16.4, 19.2), (13.4, 22.6)],
        ],
        _ => panic!("digit must be 0..=9"),
    }
}

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 <= 1e-12 {
        0.0
    } else {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    (dx * dx + dy * dy).sqrt()
}

/// Renders one jittered glyph: random small rotation, anisotropic scale,
/// translation and per-vertex noise, stroke width ~2.8 px.
pub fn render_glyph(digit: u8, rng: &mut ChaCha8Rng) -> Grid2 {
    let rot = rng.random_range(-0.10..0.10f64); // radians, about +-6 deg
    let sx = rng.random_range(0.95..1.08);
    let sy = rng.random_range(0.95..1.08);
    let tx = rng.random_range(-1.2..1.2);
    let ty = rng.random_range(-1.2..1.2);
    let width = rng.random_range(2.6..3.1);
    let (sin, cos) = rot.sin_cos();
    let c = (DIGIT_SIZE as f64 - 1.0) / 2.0;
    let strokes: Vec<Vec<(f64, f64)>> = template(digit)
        .into_iter()
        .map(|poly| {
            poly.into_iter()
                .map(|(x, y)| {
                    let jx = rng.random_range(-0.35..0.35);
                    let jy = rng.random_range(-0.35..0.35);
                    let (dx, dy) = ((x - c) * sx, (y - c) * sy);
                    (
                        c + cos * dx - sin * dy + tx + jx,
                        c + sin * dx + cos * dy + ty + jy,
                    )
                })
                .collect()
        })
        .collect();
    let mut g = Grid2::new(DIGIT_SIZE, DIGIT_SIZE);
    for y in 0..DIGIT_SIZE {
        for x in 0..DIGIT_SIZE {
            let p = (x as f64, y as f64);
            let mut d = f64::INFINITY;
            for poly in &strokes {
                for seg in poly.windows(2) {
                    d = d.min(dist_to_segment(p, seg[0], seg[1]));
                }
            }
            g.data[y * DIGIT_SIZE + x] = ((width / 2.0 + 0.5 - d).clamp(0.0, 1.0)) as f32;
        }
    }
    g
}

/// A healthy, unperturbed digit image in the `[0, 1]` generation range.
#[derive(Clone, Debug)]
pub struct DigitImage {
    pub pixels: Grid2,
    pub digit: u8,
}

/// Generates `n` glyphs cycling through digits 0-9, one RNG stream per item.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<DigitImage> {
    let streams = crate::rng::SeedStream::new(seed);
    (0..n)
        .map(|i| {
            let mut rng = streams.item_rng(0xC0_94_15, i as u64);
            let digit = (i % 10) as u8;
            DigitImage {
                pixels: render_glyph(digit, &mut rng),
                digit,
            }
        })
        .collect()
}
