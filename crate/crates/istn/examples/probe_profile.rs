use std::time::Instant;

use istn::models::{build_discriminator, build_itn};
use istn::tensor::Tensor;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn timeit<F: FnMut()>(name: &str, iters: usize, mut f: F) {
    let t = Instant::now();
    for _ in 0..iters {
        f();
    }
    println!("{name}: {:.1} ms/iter", t.elapsed().as_secs_f64() * 1000.0 / iters as f64);
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut itn = build_itn::<f32>(2, &mut rng).unwrap();
    let mut dis = build_discriminator::<f32>(2, &mut rng).unwrap();
    let mut x = Tensor::<f32>::zeros(&[16, 1, 28, 28]);
    for v in x.data_mut() {
        *v = rng.random_range(-1.0f32..1.0);
    }
    let y = itn.forward(&x, true, &mut rng);
    let d = dis.forward(&x, true, &mut rng);

    timeit("itn fwd (b16)", 10, || {
        let _ = itn.forward(&x, true, &mut rng);
    });
    timeit("itn bwd (b16)", 10, || {
        let _ = itn.backward(&y);
    });
    timeit("dis fwd (b16)", 10, || {
        let _ = dis.forward(&x, true, &mut rng);
    });
    timeit("dis bwd (b16)", 10, || {
        let _ = dis.backward(&d);
    });
}
