use istn::synth::morpho::{binarize, component_count};
use istn::synth::{apply_fracture, generate_corpus, sample_fracture_params};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let corpus = generate_corpus(100, 47);
    for (i, d) in corpus.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + i as u64);
        let p = sample_fracture_params(&d.pixels, &mut rng).unwrap();
        let out = apply_fracture(&d.pixels, &p).unwrap();
        let before = component_count(&binarize(&d.pixels, 0.5), 28, 28);
        let after = component_count(&binarize(&out, 0.5), 28, 28);
        if after <= before {
            println!(
                "glyph {i} digit {} NOT severed (center {:.1},{:.1} half_len {:.1})",
                d.digit, p.center.0, p.center.1, p.half_len
            );
        }
    }
}
