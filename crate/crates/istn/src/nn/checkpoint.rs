//! Checkpoints: named-parameter flat binary with a JSON manifest.
//!
//! A checkpoint base path `ckpt` produces `ckpt.bin` (all values
//! little-endian, concatenated) and `ckpt.json` mapping each name to
//! `{offset, shape, dtype}` plus optional attached JSON blobs (optimizer
//! state, RNG positions).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub offset: usize,
    pub len: usize,
    pub dtype: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
    /// Free-form attachments (Adam state, RNG positions, step counters).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, Value>,
}

/// In-memory checkpoint under construction or after load.
pub struct Checkpoint<T> {
    pub values: Vec<T>,
    pub manifest: Manifest,
}

impl<T: Scalar> Default for Checkpoint<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            manifest: Manifest::default(),
        }
    }

    pub fn push(&mut self, name: &str, data: &[T]) {
        let offset = self.values.len();
        self.values.extend_from_slice(data);
        self.manifest.entries.insert(
            name.to_string(),
            ManifestEntry {
                offset,
                len: data.len(),
                dtype: T::DTYPE.to_string(),
            },
        );
    }

    pub fn attach<S: Serialize>(&mut self, key: &str, value: &S) -> Result<()> {
        self.manifest
            .extras
            .insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn extra<D: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<D> {
        let v = self
            .manifest
            .extras
            .get(key)
            .ok_or_else(|| Error::Dependency(format!("checkpoint extra '{key}' missing")))?;
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn get(&self, name: &str) -> Result<&[T]> {
        let e = self
            .manifest
            .entries
            .get(name)
            .ok_or_else(|| Error::Dependency(format!("checkpoint entry '{name}' missing")))?;
        Ok(&self.values[e.offset..e.offset + e.len])
    }

    pub fn save(&self, base: &Path) -> Result<()> {
        if let Some(dir) = base.parent() {
            std::fs::create_dir_all(dir)?;
        }
        io::write_scalars(&base.with_extension("bin"), &self.values)?;
        io::write_json(&base.with_extension("json"), &self.manifest)
    }

    pub fn load(base: &Path) -> Result<Self> {
        let manifest: Manifest = io::read_json(&base.with_extension("json"))?;
        let total: usize = manifest.entries.values().map(|e| e.len).sum();
        for e in manifest.entries.values() {
            if e.dtype != T::DTYPE {
                return Err(Error::Format(format!(
                    "checkpoint dtype {} does not match requested {}",
                    e.dtype,
                    T::DTYPE
                )));
            }
        }
        let values = io::read_scalars::<T>(&base.with_extension("bin"), total)?;
        Ok(Self { values, manifest })
    }
}
