use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Adam optimizer over the parameter slots exposed by `visit_params`.
///
/// Moment buffers are keyed by visit order, which is stable for a given
/// network structure; checkpointing captures them for bit-identical resume.
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

/// Serializable Adam state (see [`Adam::state`] / [`Adam::restore`]).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update over parameter slots delivered by `visit`. The closure must
    /// deliver the same slots in the same order on every call.
    pub fn step<F>(&mut self, mut visit: F)
    where
        F: FnMut(&mut dyn FnMut(&mut [T], &[T])),
    {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let lr_t = self.lr * bc2.sqrt() / bc1;
        let b1 = T::c(self.beta1);
        let nb1 = T::c(1.0 - self.beta1);
        let b2 = T::c(self.beta2);
        let nb2 = T::c(1.0 - self.beta2);
        let step_size = T::c(lr_t);
        let eps = T::c(self.eps);
        let mut slot = 0usize;
        let m_buf = &mut self.m;
        let v_buf = &mut self.v;
        visit(&mut |p: &mut [T], g: &[T]| {
            if slot == m_buf.len() {
                m_buf.push(vec![T::zero(); p.len()]);
                v_buf.push(vec![T::zero(); p.len()]);
            }
            let m = &mut m_buf[slot];
            let v = &mut v_buf[slot];
            debug_assert_eq!(m.len(), p.len());
            for i in 0..p.len() {
                m[i] = b1 * m[i] + nb1 * g[i];
                v[i] = b2 * v[i] + nb2 * g[i] * g[i];
                p[i] = p[i] - step_size * m[i] / (v[i].sqrt() + eps);
            }
            slot += 1;
        });
    }

    pub fn state(&self) -> AdamState {
        AdamState {
            t: self.t,
            m: self
                .m
                .iter()
                .map(|s| s.iter().map(|v| v.as_f64()).collect())
                .collect(),
            v: self
                .v
                .iter()
                .map(|s| s.iter().map(|v| v.as_f64()).collect())
                .collect(),
        }
    }

    pub fn restore(&mut self, state: &AdamState) {
        self.t = state.t;
        self.m = state
            .m
            .iter()
            .map(|s| s.iter().map(|&v| T::c(v)).collect())
            .collect();
        self.v = state
            .v
            .iter()
            .map(|s| s.iter().map(|&v| T::c(v)).collect())
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(p) = 0.5 * (p - 3)^2
        let mut p = vec![0.0f64];
        let mut opt = Adam::<f64>::new(0.1, 0.9, 0.999);
        for _ in 0..500 {
            let g = vec![p[0] - 3.0];
            opt.step(|f| f(&mut p, &g));
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "p = {}", p[0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction, |Δp| of the first Adam step equals lr.
        let mut p = vec![1.0f64];
        let g = vec![0.37];
        let mut opt = Adam::<f64>::new(0.01, 0.5, 0.999);
        opt.step(|f| f(&mut p, &g));
        assert!((p[0] - (1.0 - 0.01)).abs() < 1e-6);
    }
}
