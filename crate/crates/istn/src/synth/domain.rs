//! Domain construction: thickness, slant, and one class perturbation per
//! image, deterministic under (spec, seed, corpus).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{shuffled_indices, SeedStream};
use crate::tensor::Tensor;

use super::glyph::{DigitImage, DIGIT_SIZE};
use super::morpho::{
    apply_fracture, apply_slant, apply_swelling, sample_fracture_params, sample_swell_params,
    set_stroke_thickness, Grid2,
};

const FAMILY_PERM: u64 = 1;
const FAMILY_IMAGE: u64 = 2;
const FAMILY_CLASS: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DomainId {
    A,
    B,
    C,
    D,
}

impl DomainId {
    pub fn stroke_thickness_px(self) -> f64 {
        match self {
            DomainId::A | DomainId::C => 2.5,
            DomainId::B | DomainId::D => 5.0,
        }
    }

    pub fn slant_deg_range(self) -> Option<(f64, f64)> {
        match self {
            DomainId::A | DomainId::B => None,
            DomainId::C | DomainId::D => Some((20.0, 25.0)),
        }
    }
}

impl std::str::FromStr for DomainId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(DomainId::A),
            "B" | "b" => Ok(DomainId::B),
            "C" | "c" => Ok(DomainId::C),
            "D" | "d" => Ok(DomainId::D),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

impl std::fmt::Display for DomainId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Perturbation classes; a digit is only either fractured or swollen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbClass {
    Healthy = 0,
    Fractured = 1,
    Swollen = 2,
}

pub const CLASS_NAMES: [&str; 3] = ["healthy", "fractured", "swollen"];

impl PerturbClass {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(PerturbClass::Healthy),
            1 => Ok(PerturbClass::Fractured),
            2 => Ok(PerturbClass::Swollen),
            other => Err(Error::Format(format!("class index {other} out of range"))),
        }
    }
}

/// Recipe for one synthetic domain.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DomainSpec {
    pub domain: DomainId,
    pub stroke_thickness_px: f64,
    pub slant_deg_range: Option<(f64, f64)>,
    pub class_proportions: [f64; 3],
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl DomainSpec {
    /// Canonical recipe: domain-coded thickness/slant, balanced classes,
    /// 9000 train / 1500 test.
    pub fn standard(domain: DomainId, seed: u64) -> Self {
        Self {
            domain,
            stroke_thickness_px: domain.stroke_thickness_px(),
            slant_deg_range: domain.slant_deg_range(),
            class_proportions: [1.0 / 3.0; 3],
            n_train: 9000,
            n_test: 1500,
            seed,
        }
    }

    pub fn with_sizes(mut self, n_train: usize, n_test: usize) -> Self {
        self.n_train = n_train;
        self.n_test = n_test;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Param("split sizes must be positive".into()));
        }
        if self.class_proportions.iter().any(|&p| p < 0.0) {
            return Err(Error::Param("class proportions must be nonnegative".into()));
        }
        let sum: f64 = self.class_proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Param(format!(
                "class proportions sum to {sum}, want 1"
            )));
        }
        if self.stroke_thickness_px != self.domain.stroke_thickness_px()
            || self.slant_deg_range != self.domain.slant_deg_range()
        {
            return Err(Error::Param(format!(
                "domain {} requires thickness {} and slant {:?}",
                self.domain,
                self.domain.stroke_thickness_px(),
                self.domain.slant_deg_range()
            )));
        }
        Ok(())
    }
}

/// One split: images `[N, 1, 28, 28]` normalized to `[-1, 1]`, class and
/// digit labels aligned by index.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImages {
    pub images: Tensor<f32>,
    pub classes: Vec<u8>,
    pub digits: Vec<u8>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Rows selected by index, in order.
    pub fn subset(&self, indices: &[usize]) -> LabeledImages {
        let per = self.images.numel() / self.len().max(1);
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut classes = Vec::with_capacity(indices.len());
        let mut digits = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.images.sample(i));
            classes.push(self.classes[i]);
            digits.push(self.digits[i]);
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = indices.len();
        LabeledImages {
            images: Tensor::from_vec(&shape, data).expect("subset shape"),
            classes,
            digits,
        }
    }

    /// Same images with the labels dropped (label-hygiene boundary for the
    /// adaptation path).
    pub fn images_only(&self) -> Tensor<f32> {
        self.images.clone()
    }
}

#[derive(Clone, Debug)]
pub struct DomainDataset {
    pub spec: DomainSpec,
    pub train: LabeledImages,
    pub test: LabeledImages,
}

/// Exact class quotas: `floor(n * p)` per class, remainder assigned to the
/// largest fractional parts, then a seeded shuffle over positions.
fn class_assignment(n: usize, proportions: &[f64; 3], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<u8> {
    let mut counts = [0usize; 3];
    let mut fracs: Vec<(usize, f64)> = Vec::new();
    let mut assigned = 0usize;
    for k in 0..3 {
        let exact = n as f64 * proportions[k];
        counts[k] = exact.floor() as usize;
        assigned += counts[k];
        fracs.push((k, exact - exact.floor()));
    }
    fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for i in 0..n - assigned {
        counts[fracs[i % 3].0] += 1;
    }
    let mut labels = Vec::with_capacity(n);
    for (k, &c) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat_n(k as u8, c));
    }
    let perm = shuffled_indices(n, rng);
    perm.into_iter().map(|i| labels[i]).collect()
}

/// Builds a full domain: per image, thickness then slant then one class
/// perturbation, all randomness derived from `(spec.seed, image index)`.
pub fn build_domain(spec: &DomainSpec, corpus: &[DigitImage]) -> Result<DomainDataset> {
    spec.validate()?;
    let total = spec.n_train + spec.n_test;
    if corpus.len() < total {
        return Err(Error::Size(format!(
            "corpus holds {} digits, domain needs {}",
            corpus.len(),
            total
        )));
    }
    let streams = SeedStream::new(spec.seed);
    let perm = shuffled_indices(corpus.len(), &mut streams.rng(FAMILY_PERM));
    let classes = class_assignment(total, &spec.class_proportions, &mut streams.rng(FAMILY_CLASS));

    let mut data = Vec::with_capacity(total * DIGIT_SIZE * DIGIT_SIZE);
    let mut digits = Vec::with_capacity(total);
    let mut cursor = 0usize;
    for i in 0..total {
        let mut rng = streams.item_rng(FAMILY_IMAGE, i as u64);
        // rare glyphs miss the thickness tolerance (e.g. a jittered loop
        // closing at 5 px); skip to the next unused corpus digit, still
        // deterministic under (spec, seed, corpus)
        let (src, img) = loop {
            let src = corpus.get(perm.get(cursor).copied().unwrap_or(usize::MAX)).ok_or_else(|| {
                Error::Size(format!(
                    "corpus exhausted after {cursor} draws while building {total} images"
                ))
            })?;
            cursor += 1;
            match set_stroke_thickness(&src.pixels, spec.stroke_thickness_px) {
                Ok(img) => break (src, img),
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            }
        };
        let mut img = img;
        if let Some((lo, hi)) = spec.slant_deg_range {
            use rand::RngExt;
            let angle = rng.random_range(lo..hi);
            img = apply_slant(&img, angle)?;
        }
        img = perturb(&img, PerturbClass::from_index(classes[i])?, &mut rng)?;
        data.extend(img.data.iter().map(|&v| (2.0 * v - 1.0).clamp(-1.0, 1.0)));
        digits.push(src.digit);
    }
    let images = Tensor::from_vec(&[total, 1, DIGIT_SIZE, DIGIT_SIZE], data)?;

    let split = |range: std::ops::Range<usize>| -> LabeledImages {
        let idx: Vec<usize> = range.collect();
        LabeledImages {
            images: {
                let per = DIGIT_SIZE * DIGIT_SIZE;
                let mut d = Vec::with_capacity(idx.len() * per);
                for &i in &idx {
                    d.extend_from_slice(images.sample(i));
                }
                Tensor::from_vec(&[idx.len(), 1, DIGIT_SIZE, DIGIT_SIZE], d).expect("split shape")
            },
            classes: idx.iter().map(|&i| classes[i]).collect(),
            digits: idx.iter().map(|&i| digits[i]).collect(),
        }
    };
    Ok(DomainDataset {
        spec: spec.clone(),
        train: split(0..spec.n_train),
        test: split(spec.n_train..total),
    })
}

fn perturb(img: &Grid2, class: PerturbClass, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Grid2> {
    match class {
        PerturbClass::Healthy => Ok(img.clone()),
        PerturbClass::Swollen => {
            let p = sample_swell_params(img, rng)?;
            apply_swelling(img, &p)
        }
        PerturbClass::Fractured => {
            let p = sample_fracture_params(img, rng)?;
            apply_fracture(img, &p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::glyph::generate_corpus;
    use crate::synth::morpho::{estimate_slant_deg, measure_thickness};

    fn small_spec(domain: DomainId) -> DomainSpec {
        DomainSpec::standard(domain, 77).with_sizes(60, 20)
    }

    #[test]
    fn build_is_deterministic() {
        let corpus = generate_corpus(100, 1);
        let spec = small_spec(DomainId::A);
        let a = build_domain(&spec, &corpus).unwrap();
        let b = build_domain(&spec, &corpus).unwrap();
        assert_eq!(a.train.images, b.train.images);
        assert_eq!(a.test.images, b.test.images);
        assert_eq!(a.train.classes, b.train.classes);
    }

    #[test]
    fn corpus_too_small_is_size_error() {
        let corpus = generate_corpus(50, 1);
        let spec = small_spec(DomainId::A);
        assert!(matches!(
            build_domain(&spec, &corpus),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn images_are_in_training_range() {
        let corpus = generate_corpus(100, 2);
        let ds = build_domain(&small_spec(DomainId::D), &corpus).unwrap();
        let (lo, hi) = ds.train.images.min_max();
        assert!(lo >= -1.0 && hi <= 1.0);
        assert!(hi > 0.0, "digits should have bright foreground");
    }

    #[test]
    fn class_quota_is_exact() {
        let corpus = generate_corpus(120, 3);
        let spec = DomainSpec::standard(DomainId::A, 5).with_sizes(90, 12);
        let ds = build_domain(&spec, &corpus).unwrap();
        let mut counts = [0usize; 3];
        for &c in ds.train.classes.iter().chain(ds.test.classes.iter()) {
            counts[c as usize] += 1;
        }
        assert_eq!(counts, [34, 34, 34]);
    }

    #[test]
    fn domain_thickness_and_slant_audits() {
        let corpus = generate_corpus(80, 4);
        // thin unslanted
        let a = build_domain(&small_spec(DomainId::A), &corpus).unwrap();
        let mut thick_sum = 0.0;
        for i in 0..a.train.len() {
            let g = Grid2::from_vec(
                28,
                28,
                a.train.images.sample(i).iter().map(|&v| (v + 1.0) / 2.0).collect(),
            );
            thick_sum += measure_thickness(&g).unwrap();
        }
        let mean_thick = thick_sum / a.train.len() as f64;
        assert!(
            (mean_thick - 2.5).abs() <= 0.5,
            "domain A mean thickness {mean_thick}"
        );

        // slanted domain: mean slant-estimate shift vs A should be ~22.5 deg
        let c = build_domain(&small_spec(DomainId::C), &corpus).unwrap();
        let mean_slant = |ds: &DomainDataset| -> f64 {
            let mut s = 0.0;
            for i in 0..ds.train.len() {
                let g = Grid2::from_vec(
                    28,
                    28,
                    ds.train.images.sample(i).iter().map(|&v| (v + 1.0) / 2.0).collect(),
                );
                s += estimate_slant_deg(&g);
            }
            s / ds.train.len() as f64
        };
        let shift = mean_slant(&c) - mean_slant(&a);
        assert!(
            (shift - 22.5).abs() <= 5.0,
            "slant shift estimate {shift}"
        );
    }

    #[test]
    fn validate_rejects_inconsistent_domain_coding() {
        let mut spec = small_spec(DomainId::A);
        spec.stroke_thickness_px = 5.0;
        assert!(spec.validate().is_err());
    }
}
