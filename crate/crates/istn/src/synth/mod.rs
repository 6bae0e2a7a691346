//! Synthetic digit domains: four controlled domain shifts (thin/thick x
//! unslanted/slanted) over three perturbation classes (healthy, fractured,
//! swollen), plus IDX ingestion and the procedural glyph corpus.

pub mod blobs;
mod domain;
mod glyph;
mod idx;
pub mod morpho;
mod store;

pub use domain::{
    build_domain, DomainDataset, DomainId, DomainSpec, LabeledImages, PerturbClass, CLASS_NAMES,
};
pub use glyph::{generate_corpus, render_glyph, DigitImage, DIGIT_SIZE};
pub use idx::{
    load_digit_corpus, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels,
    IMAGES_MAGIC, LABELS_MAGIC,
};
pub use morpho::{
    apply_fracture, apply_slant, apply_swelling, estimate_slant_deg, measure_thickness,
    sample_fracture_params, sample_swell_params, set_stroke_thickness, FractureParams, Grid2,
    SwellParams,
};
pub use store::{dataset_matches, load_dataset, save_dataset};
