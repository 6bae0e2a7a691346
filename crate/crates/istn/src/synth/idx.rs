//! IDX file ingestion (big-endian headers; magic 0x00000803 for images,
//! 0x00000801 for labels) and the corresponding writer used by tests and the
//! corpus cache.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

use super::glyph::DigitImage;
use super::morpho::Grid2;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], off: usize) -> Result<u32> {
    if off + 4 > bytes.len() {
        return Err(Error::Length("idx header truncated".into()));
    }
    Ok(u32::from_be_bytes([
        bytes[off],
        bytes[off + 1],
        bytes[off + 2],
        bytes[off + 3],
    ]))
}

/// Parses an IDX image file into `[0, 1]`-scaled grids.
pub fn read_idx_images(path: &Path) -> Result<Vec<Grid2>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let magic = read_u32_be(&bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{}: image magic 0x{magic:08x}, want 0x{IMAGES_MAGIC:08x}",
            path.display()
        )));
    }
    let count = read_u32_be(&bytes, 4)? as usize;
    let rows = read_u32_be(&bytes, 8)? as usize;
    let cols = read_u32_be(&bytes, 12)? as usize;
    let need = 16 + count * rows * cols;
    if bytes.len() != need {
        return Err(Error::Length(format!(
            "{}: payload is {} bytes, header declares {}",
            path.display(),
            bytes.len(),
            need
        )));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        let data: Vec<f32> = bytes[start..start + rows * cols]
            .iter()
            .map(|&b| b as f32 / 255.0)
            .collect();
        out.push(Grid2::from_vec(cols, rows, data));
    }
    Ok(out)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let magic = read_u32_be(&bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{}: label magic 0x{magic:08x}, want 0x{LABELS_MAGIC:08x}",
            path.display()
        )));
    }
    let count = read_u32_be(&bytes, 4)? as usize;
    if bytes.len() != 8 + count {
        return Err(Error::Length(format!(
            "{}: payload is {} bytes, header declares {}",
            path.display(),
            bytes.len(),
            8 + count
        )));
    }
    Ok(bytes[8..].to_vec())
}

pub fn write_idx_images(path: &Path, images: &[Grid2]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let (rows, cols) = images
        .first()
        .map(|g| (g.h, g.w))
        .unwrap_or((28, 28));
    let mut bytes = Vec::with_capacity(16 + images.len() * rows * cols);
    bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for g in images {
        for &v in &g.data {
            bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::write(path, bytes)?;
    Ok(())
}

/// Loads a healthy, unperturbed digit corpus from an IDX image/label pair.
pub fn load_digit_corpus(images_path: &Path, labels_path: &Path) -> Result<Vec<DigitImage>> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::Length(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(images
        .into_iter()
        .zip(labels)
        .map(|(pixels, digit)| DigitImage { pixels, digit })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::glyph::generate_corpus;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("istn_idx_test");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn idx_round_trip_preserves_count_and_shape() {
        let corpus = generate_corpus(30, 11);
        let images: Vec<Grid2> = corpus.iter().map(|d| d.pixels.clone()).collect();
        let labels: Vec<u8> = corpus.iter().map(|d| d.digit).collect();
        let ip = tmp("imgs.idx");
        let lp = tmp("labels.idx");
        write_idx_images(&ip, &images).unwrap();
        write_idx_labels(&lp, &labels).unwrap();
        let loaded = load_digit_corpus(&ip, &lp).unwrap();
        assert_eq!(loaded.len(), 30);
        for (a, b) in loaded.iter().zip(corpus.iter()) {
            assert_eq!(a.digit, b.digit);
            assert_eq!(a.pixels.w, 28);
            assert_eq!(a.pixels.h, 28);
        }
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let p = tmp("bad_magic.idx");
        let mut bytes = vec![];
        bytes.extend_from_slice(&0x0000_0802u32.to_be_bytes());
        bytes.extend_from_slice(&1u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&[0u8; 784]);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_idx_images(&p), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_length_error() {
        let p = tmp("trunc.idx");
        let mut bytes = vec![];
        bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&[7u8; 784]); // only one image of two
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_idx_images(&p), Err(Error::Length(_))));
    }

    /// Independent second parser: raw offset arithmetic, no shared code path.
    #[test]
    fn first_image_checksum_matches_independent_parser() {
        let corpus = generate_corpus(5, 23);
        let images: Vec<Grid2> = corpus.iter().map(|d| d.pixels.clone()).collect();
        let p = tmp("oracle.idx");
        write_idx_images(&p, &images).unwrap();

        // library path
        let loaded = read_idx_images(&p).unwrap();
        let lib_sum: u64 = loaded[0]
            .data
            .iter()
            .map(|&v| (v * 255.0).round() as u64)
            .sum();

        // oracle path: read bytes directly
        let bytes = fs::read(&p).unwrap();
        let rows = u32::from_be_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
        let cols = u32::from_be_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]) as usize;
        let oracle_sum: u64 = bytes[16..16 + rows * cols].iter().map(|&b| b as u64).sum();

        assert_eq!(lib_sum, oracle_sum);
    }
}
