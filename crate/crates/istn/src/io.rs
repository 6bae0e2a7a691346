//! Flat-binary array files with JSON sidecar headers.
//!
//! An array is stored as `<base>.bin` (little-endian scalars, row-major) plus
//! `<base>.json` describing shape and dtype. Checkpoints and dataset images
//! reuse the same encoding.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ArrayHeader {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub byte_order: String,
}

impl ArrayHeader {
    pub fn new<T: Scalar>(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            dtype: T::DTYPE.to_string(),
            byte_order: "little".to_string(),
        }
    }
}

pub fn write_scalars<T: Scalar>(path: &Path, data: &[T]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    if T::DTYPE == "float32" {
        let mut buf = Vec::with_capacity(data.len() * 4);
        for v in data {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        f.write_all(&buf)?;
    } else {
        let mut buf = Vec::with_capacity(data.len() * 8);
        for v in data {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        f.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_scalars<T: Scalar>(path: &Path, expected: usize) -> Result<Vec<T>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let width = if T::DTYPE == "float32" { 4 } else { 8 };
    if bytes.len() != expected * width {
        return Err(Error::Length(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            expected * width,
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(expected);
    if width == 4 {
        for c in bytes.chunks_exact(4) {
            out.push(T::c(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
        }
    } else {
        for c in bytes.chunks_exact(8) {
            out.push(T::c(f64::from_le_bytes([
                c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7],
            ])));
        }
    }
    Ok(out)
}

/// Writes `<base>.bin` + `<base>.json`.
pub fn save_tensor<T: Scalar>(base: &Path, t: &Tensor<T>) -> Result<()> {
    if let Some(dir) = base.parent() {
        fs::create_dir_all(dir)?;
    }
    write_scalars(&base.with_extension("bin"), t.data())?;
    let header = ArrayHeader::new::<T>(t.shape());
    fs::write(
        base.with_extension("json"),
        serde_json::to_string_pretty(&header)?,
    )?;
    Ok(())
}

pub fn load_tensor<T: Scalar>(base: &Path) -> Result<Tensor<T>> {
    let header: ArrayHeader =
        serde_json::from_str(&fs::read_to_string(base.with_extension("json"))?)?;
    if header.dtype != T::DTYPE {
        return Err(Error::Format(format!(
            "{}: dtype {} does not match requested {}",
            base.display(),
            header.dtype,
            T::DTYPE
        )));
    }
    if header.byte_order != "little" {
        return Err(Error::Format(format!(
            "{}: unsupported byte order {}",
            base.display(),
            header.byte_order
        )));
    }
    let n: usize = header.shape.iter().product();
    let data = read_scalars::<T>(&base.with_extension("bin"), n)?;
    Tensor::from_vec(&header.shape, data)
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
