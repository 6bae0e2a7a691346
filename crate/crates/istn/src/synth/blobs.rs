//! Synthetic 3D blob domains (64^3) for the end-to-end 3D smoke adaptation:
//! two domains differing in contrast (near-inverted foreground/background)
//! and pose jitter, with a binary blob-count label that survives the shift.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::rng::SeedStream;
use crate::tensor::Tensor;

pub const BLOB_SIZE: usize = 64;

#[derive(Clone, Debug)]
pub struct BlobDataset {
    /// `[N, 1, 64, 64, 64]`, intensities in `[-1, 1]`.
    pub images: Tensor<f32>,
    /// 0: one blob, 1: two blobs.
    pub labels: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlobDomain {
    /// Bright blobs on a dark background, centered pose.
    Source,
    /// Inverted contrast and translated pose.
    Target,
}

fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

pub fn build_blob_domain(domain: BlobDomain, n: usize, seed: u64) -> BlobDataset {
    let streams = SeedStream::new(seed);
    let s = BLOB_SIZE;
    let mut data = Vec::with_capacity(n * s * s * s);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = streams.item_rng(0xB1_0B, i as u64);
        let two = i % 2 == 1;
        labels.push(two as u8);
        let (bg, fg) = match domain {
            BlobDomain::Source => (-0.8f64, 0.7f64),
            BlobDomain::Target => (0.35f64, -0.75f64),
        };
        let pose_jitter = match domain {
            BlobDomain::Source => 2.0,
            BlobDomain::Target => 5.0,
        };
        let jitter = |rng: &mut ChaCha8Rng| -> (f64, f64, f64) {
            (
                rng.random_range(-pose_jitter..pose_jitter),
                rng.random_range(-pose_jitter..pose_jitter),
                rng.random_range(-pose_jitter..pose_jitter),
            )
        };
        let c = (s as f64 - 1.0) / 2.0;
        let mut blobs: Vec<(f64, f64, f64, f64)> = Vec::new();
        if two {
            let sep = rng.random_range(10.0..16.0);
            let (jx, jy, jz) = jitter(&mut rng);
            let r1 = rng.random_range(6.0..9.0);
            let r2 = rng.random_range(6.0..9.0);
            blobs.push((c - sep / 2.0 + jx, c + jy, c + jz, r1));
            blobs.push((c + sep / 2.0 + jx, c + jy, c + jz, r2));
        } else {
            let (jx, jy, jz) = jitter(&mut rng);
            let r = rng.random_range(8.0..12.0);
            blobs.push((c + jx, c + jy, c + jz, r));
        }
        let noise_amp = 0.05;
        for z in 0..s {
            for y in 0..s {
                for x in 0..s {
                    let mut occ: f64 = 0.0;
                    for &(bx, by, bz, r) in &blobs {
                        let d = ((x as f64 - bx).powi(2)
                            + (y as f64 - by).powi(2)
                            + (z as f64 - bz).powi(2))
                        .sqrt();
                        occ = occ.max(smoothstep((r - d) / 2.0 + 0.5));
                    }
                    let noise = noise_amp * (rng.random_range(-1.0..1.0));
                    let v = bg + (fg - bg) * occ + noise;
                    data.push(v.clamp(-1.0, 1.0) as f32);
                }
            }
        }
    }
    BlobDataset {
        images: Tensor::from_vec(&[n, 1, s, s, s], data).expect("blob shape"),
        labels,
    }
}
