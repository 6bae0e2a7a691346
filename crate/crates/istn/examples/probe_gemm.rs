use std::time::Instant;

fn main() {
    // ITN mid-layer shape: W(128x576) * cols(576x784)
    for (m, k, n) in [(128usize, 576usize, 784usize), (64, 288, 3136), (32, 144, 12544), (16, 9, 12544), (256, 1152, 256)] {
        let a = vec![1.0f32; m * k];
        let b = vec![1.0f32; k * n];
        let mut c = vec![0.0f32; m * n];
        let iters = 20;
        let t = Instant::now();
        for _ in 0..iters {
            unsafe {
                matrixmultiply::sgemm(
                    m, k, n, 1.0,
                    a.as_ptr(), k as isize, 1,
                    b.as_ptr(), n as isize, 1,
                    0.0,
                    c.as_mut_ptr(), n as isize, 1,
                );
            }
        }
        let secs = t.elapsed().as_secs_f64() / iters as f64;
        let gflops = 2.0 * (m * k * n) as f64 / secs / 1e9;
        println!("gemm {m}x{k}x{n}: {:.2} ms, {gflops:.1} GFLOP/s", secs * 1e3);
    }
}
