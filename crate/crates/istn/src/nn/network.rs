use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::block::{Block, FwdCtx};
use super::spec::NetworkSpec;

/// A network built from a [`NetworkSpec`]: an ordered block list with
/// additive skip links between equal-shaped block outputs.
///
/// `forward` caches every block output so `backward` can route gradients
/// through the skips; callers interleaving passes over different inputs must
/// backward before the next forward overwrites the caches.
pub struct Network<T> {
    pub spec: NetworkSpec,
    blocks: Vec<Block<T>>,
    outs: Vec<Tensor<T>>,
    batch: usize,
}

impl<T: Scalar> Network<T> {
    pub fn build(spec: NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.shape_trace()?;
        let mut blocks = Vec::with_capacity(spec.layers.len());
        let mut in_shape = spec.input_shape.clone();
        for (layer, out_shape) in spec.layers.iter().zip(shapes.iter()) {
            blocks.push(Block::build(layer, spec.dim, &in_shape, out_shape, rng)?);
            in_shape = out_shape.clone();
        }
        Ok(Self {
            spec,
            blocks,
            outs: Vec::new(),
            batch: 0,
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, train: bool, rng: &mut ChaCha8Rng) -> Tensor<T> {
        let mut ctx = FwdCtx { train, rng };
        self.batch = x.shape()[0];
        self.outs.clear();
        let mut cur = x.clone();
        for (i, block) in self.blocks.iter_mut().enumerate() {
            let mut y = block.forward(&cur, &mut ctx);
            for &(from, to) in &self.spec.skips {
                if to == i {
                    y.add_scaled(&self.outs[from], T::one());
                }
            }
            self.outs.push(y.clone());
            cur = y;
        }
        cur
    }

    /// Backpropagates `gout` through the whole network, accumulating
    /// parameter gradients; returns the gradient w.r.t. the network input.
    pub fn backward(&mut self, gout: &Tensor<T>) -> Tensor<T> {
        self.backward_opts(gout, true)
    }

    /// Backward returning only the input gradient (parameter gradients are
    /// left untouched).
    pub fn backward_input_only(&mut self, gout: &Tensor<T>) -> Tensor<T> {
        self.backward_opts(gout, false)
    }

    fn backward_opts(&mut self, gout: &Tensor<T>, param_grads: bool) -> Tensor<T> {
        let n = self.blocks.len();
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; n];
        grads[n - 1] = Some(gout.clone());
        let mut g_input: Option<Tensor<T>> = None;
        for i in (0..n).rev() {
            let g = grads[i].take().expect("gradient must reach every block");
            // route through skips terminating at block i
            for &(from, to) in &self.spec.skips {
                if to == i {
                    match &mut grads[from] {
                        Some(acc) => acc.add_scaled(&g, T::one()),
                        slot => *slot = Some(g.clone()),
                    }
                }
            }
            let gin = self.blocks[i].backward_opts(&g, param_grads);
            if i == 0 {
                g_input = Some(gin);
            } else {
                match &mut grads[i - 1] {
                    Some(acc) => acc.add_scaled(&gin, T::one()),
                    slot => *slot = Some(gin),
                }
            }
        }
        g_input.expect("network has at least one block")
    }

    /// Output shapes (without batch axis) observed in the last forward.
    pub fn observed_shapes(&self) -> Vec<Vec<usize>> {
        self.outs
            .iter()
            .map(|t| t.shape()[1..].to_vec())
            .collect()
    }

    pub fn output(&self, block: usize) -> &Tensor<T> {
        &self.outs[block]
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.blocks {
            b.zero_grad();
        }
    }

    /// Visits `(name, values, grads)` for every trainable parameter, names
    /// like `"3.w"`.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(String, &mut Vec<T>, &mut Vec<T>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_params(&mut |suffix, p, g| f(format!("{i}.{suffix}"), p, g));
        }
    }

    /// Visits persistent non-trainable state (running statistics).
    pub fn visit_state(&mut self, f: &mut dyn FnMut(String, &mut Vec<T>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_state(&mut |suffix, s| f(format!("{i}.{suffix}"), s));
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p, _| n += p.len());
        n
    }

    /// Fresh network with identical structure, parameters, and running
    /// state (caches are not carried over).
    pub fn duplicate(&mut self) -> Result<Network<T>> {
        let mut rng = rand::SeedableRng::seed_from_u64(0);
        let mut copy = Network::build(self.spec.clone(), &mut rng)?;
        let mut params: Vec<Vec<T>> = Vec::new();
        self.visit_params(&mut |_, p, _| params.push(p.clone()));
        let mut i = 0;
        copy.visit_params(&mut |_, p, _| {
            p.copy_from_slice(&params[i]);
            i += 1;
        });
        let mut state: Vec<Vec<T>> = Vec::new();
        self.visit_state(&mut |_, s| state.push(s.clone()));
        let mut i = 0;
        copy.visit_state(&mut |_, s| {
            s.copy_from_slice(&state[i]);
            i += 1;
        });
        Ok(copy)
    }

    /// Zeroes the final block's op parameters (identity-init heads).
    pub fn zero_last_op(&mut self) {
        self.blocks
            .last_mut()
            .expect("non-empty network")
            .zero_op_params();
    }

    /// Largest absolute parameter-gradient entry, for gradient-presence checks.
    pub fn max_abs_grad(&mut self) -> f64 {
        let mut m = 0.0f64;
        self.visit_params(&mut |_, _, g| {
            for v in g.iter() {
                m = m.max(v.abs().as_f64());
            }
        });
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{Activation, LayerSpec, Norm};
    use rand::{RngExt, SeedableRng};

    fn toy_spec() -> NetworkSpec {
        NetworkSpec {
            name: "toy_unet".into(),
            dim: 2,
            input_shape: vec![1, 8, 8],
            layers: vec![
                LayerSpec::conv(4, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu),
                LayerSpec::conv(8, 3, 2, 1).act(Activation::Relu),
                LayerSpec::upsample_conv(4, 3, 1).act(Activation::Relu),
                LayerSpec::conv(1, 3, 1, 1).act(Activation::Tanh),
            ],
            skips: vec![(0, 2)],
        }
    }

    #[test]
    fn forward_shapes_match_spec_trace() {
        let spec = toy_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::<f32>::build(spec.clone(), &mut rng).unwrap();
        let x = Tensor::zeros(&[3, 1, 8, 8]);
        let y = net.forward(&x, true, &mut rng);
        assert_eq!(y.shape(), &[3, 1, 8, 8]);
        assert_eq!(net.observed_shapes(), spec.shape_trace().unwrap());
    }

    #[test]
    fn skip_network_gradients_match_fd() {
        let spec = toy_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::<f64>::build(spec, &mut rng).unwrap();
        let mut x = Tensor::<f64>::zeros(&[2, 1, 8, 8]);
        let mut data_rng = ChaCha8Rng::seed_from_u64(2);
        for v in x.data_mut() {
            *v = data_rng.random_range(-1.0..1.0);
        }
        let loss = |net: &mut Network<f64>, x: &Tensor<f64>| -> f64 {
            let mut r = ChaCha8Rng::seed_from_u64(50);
            let y = net.forward(x, true, &mut r);
            0.5 * y.data().iter().map(|v| v * v).sum::<f64>()
        };
        let mut r = ChaCha8Rng::seed_from_u64(50);
        let y = net.forward(&x, true, &mut r);
        net.zero_grad();
        let dx = net.backward(&y);
        let eps = 1e-5;
        for idx in [0usize, 31, 63, 100, 127] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += eps;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= eps;
            let fd = (loss(&mut net, &xp) - loss(&mut net, &xm)) / (2.0 * eps);
            let an = dx.data()[idx];
            assert!(
                (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4) < 1e-3,
                "input grad mismatch at {idx}: fd={fd} an={an}"
            );
        }
        // probe one weight in the skip-source block
        let mut snapshot = Vec::new();
        net.visit_params(&mut |name, _p, g| snapshot.push((name, g.clone())));
        let (ref name0, ref g0) = snapshot[0];
        assert_eq!(name0, "0.w");
        let idx = 5;
        let an = g0[idx];
        let shift = |delta: f64, net: &mut Network<f64>| {
            net.visit_params(&mut |name, p, _g| {
                if name == "0.w" {
                    p[idx] += delta;
                }
            });
        };
        shift(eps, &mut net);
        let lp = loss(&mut net, &x);
        shift(-2.0 * eps, &mut net);
        let lm = loss(&mut net, &x);
        shift(eps, &mut net);
        let fd = (lp - lm) / (2.0 * eps);
        assert!(
            (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4) < 1e-3,
            "weight grad mismatch: fd={fd} an={an}"
        );
    }
}
