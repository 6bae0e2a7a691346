use std::time::Instant;

use istn::models::tables::itn_2d_spec;
use istn::nn::{Network, NetworkSpec};
use istn::tensor::Tensor;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let spec = itn_2d_spec();
    let shapes = spec.shape_trace().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut in_shape = spec.input_shape.clone();
    for (idx, layer) in spec.layers.iter().enumerate() {
        let sub = NetworkSpec {
            name: format!("l{idx}"),
            dim: 2,
            input_shape: in_shape.clone(),
            layers: vec![layer.clone()],
            skips: vec![],
        };
        let mut net = Network::<f32>::build(sub, &mut rng).unwrap();
        let mut bshape = vec![16];
        bshape.extend_from_slice(&in_shape);
        let mut x = Tensor::<f32>::zeros(&bshape);
        for v in x.data_mut() {
            *v = rng.random_range(-1.0f32..1.0);
        }
        let y = net.forward(&x, true, &mut rng);
        let iters = 20;
        let t = Instant::now();
        for _ in 0..iters {
            let _ = net.forward(&x, true, &mut rng);
        }
        let fwd = t.elapsed().as_secs_f64() * 1000.0 / iters as f64;
        let t = Instant::now();
        for _ in 0..iters {
            let _ = net.backward(&y);
        }
        let bwd = t.elapsed().as_secs_f64() * 1000.0 / iters as f64;
        println!(
            "layer {idx} {:?} {:?} -> {:?}: fwd {fwd:.2} ms bwd {bwd:.2} ms",
            layer.kind, in_shape, shapes[idx]
        );
        in_shape = shapes[idx].clone();
    }
}
