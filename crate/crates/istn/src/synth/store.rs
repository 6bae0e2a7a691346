//! Dataset directory layout:
//!
//! ```text
//! <dir>/domain.json            (DomainSpec)
//! <dir>/train/images.bin+json  (little-endian float32, shape header)
//! <dir>/train/labels.json
//! <dir>/test/...
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

use super::domain::{DomainDataset, DomainSpec, LabeledImages, CLASS_NAMES};

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LabelsFile {
    class_names: Vec<String>,
    classes: Vec<u8>,
    digits: Vec<u8>,
}

fn write_split(dir: &Path, split: &LabeledImages) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::save_tensor(&dir.join("images"), &split.images)?;
    io::write_json(
        &dir.join("labels.json"),
        &LabelsFile {
            class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            classes: split.classes.clone(),
            digits: split.digits.clone(),
        },
    )
}

fn read_split(dir: &Path) -> Result<LabeledImages> {
    let images = io::load_tensor::<f32>(&dir.join("images"))?;
    let labels: LabelsFile = io::read_json(&dir.join("labels.json"))?;
    if images.shape()[0] != labels.classes.len() || labels.classes.len() != labels.digits.len() {
        return Err(Error::Length(format!(
            "{}: {} images vs {} class labels vs {} digit labels",
            dir.display(),
            images.shape()[0],
            labels.classes.len(),
            labels.digits.len()
        )));
    }
    Ok(LabeledImages {
        images,
        classes: labels.classes,
        digits: labels.digits,
    })
}

pub fn save_dataset(dir: &Path, ds: &DomainDataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_json(&dir.join("domain.json"), &ds.spec)?;
    write_split(&dir.join("train"), &ds.train)?;
    write_split(&dir.join("test"), &ds.test)
}

pub fn load_dataset(dir: &Path) -> Result<DomainDataset> {
    let spec: DomainSpec = io::read_json(&dir.join("domain.json"))?;
    Ok(DomainDataset {
        spec,
        train: read_split(&dir.join("train"))?,
        test: read_split(&dir.join("test"))?,
    })
}

/// True when the directory already holds a complete dataset for this spec.
pub fn dataset_matches(dir: &Path, spec: &DomainSpec) -> bool {
    match io::read_json::<DomainSpec>(&dir.join("domain.json")) {
        Ok(found) => found == *spec && load_dataset(dir).is_ok(),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::domain::{build_domain, DomainId};
    use crate::synth::glyph::generate_corpus;

    #[test]
    fn dataset_round_trip_is_bit_identical() {
        let corpus = generate_corpus(40, 9);
        let spec = DomainSpec::standard(DomainId::B, 3).with_sizes(24, 8);
        let ds = build_domain(&spec, &corpus).unwrap();
        let dir = std::env::temp_dir().join("istn_store_test");
        let _ = std::fs::remove_dir_all(&dir);
        save_dataset(&dir, &ds).unwrap();
        let back = load_dataset(&dir).unwrap();
        assert_eq!(back.spec, ds.spec);
        assert_eq!(back.train.images, ds.train.images);
        assert_eq!(back.test.classes, ds.test.classes);
        assert!(dataset_matches(&dir, &spec));
        let other = DomainSpec::standard(DomainId::B, 4).with_sizes(24, 8);
        assert!(!dataset_matches(&dir, &other));
    }
}
