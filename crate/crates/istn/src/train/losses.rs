//! Adversarial loss algebra: the discriminator loss, the unidirectional
//! generator loss (adversarial + weighted identity), and the bidirectional
//! variant adding the cycle-consistency term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{bce_batch, l1_mean};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-step scalar losses with the identity/cycle weighting.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LossBundle {
    pub l_dis: f64,
    pub l_adv: f64,
    pub l_idt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_cyc: Option<f64>,
    pub lambda: f64,
}

impl LossBundle {
    /// Generator total: `L_adv + 0.5 λ L_idt (+ λ L_cyc)`.
    pub fn total_istn(&self) -> f64 {
        self.l_adv + 0.5 * self.lambda * self.l_idt + self.lambda * self.l_cyc.unwrap_or(0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.l_dis.is_finite()
            && self.l_adv.is_finite()
            && self.l_idt.is_finite()
            && self.l_cyc.map_or(true, f64::is_finite)
    }
}

/// `(loss, grads)` of the total discriminator loss
/// `0.5 [BCE(d_fake, y_fake) + BCE(d_real, y_real)]`, both terms
/// batch-averaged; the returned gradients are w.r.t. the fake and real
/// probability outputs respectively.
pub fn discriminator_loss<T: Scalar>(
    d_fake: &[T],
    d_real: &[T],
    y_fake: &[f64],
    y_real: &[f64],
) -> (f64, Vec<T>, Vec<T>) {
    let (l_f, mut g_f) = bce_batch(d_fake, y_fake);
    let (l_r, mut g_r) = bce_batch(d_real, y_real);
    let half = T::c(0.5);
    g_f.iter_mut().for_each(|v| *v *= half);
    g_r.iter_mut().for_each(|v| *v *= half);
    (0.5 * (l_f + l_r), g_f, g_r)
}

/// Unidirectional generator loss: adversarial BCE on the transferred batch
/// plus `0.5 λ` times the mean-L1 identity penalty.
///
/// Returns the bundle (with `l_dis` left at 0), the gradient w.r.t. the
/// discriminator probabilities on `S2T`, and the gradient w.r.t. `T2T`
/// (already scaled by `0.5 λ`).
pub fn istn_loss_uni<T: Scalar>(
    d_on_s2t: &[T],
    y_real: &[f64],
    t2t: &Tensor<T>,
    t: &Tensor<T>,
    lambda: f64,
) -> Result<(LossBundle, Vec<T>, Tensor<T>)> {
    if t2t.shape() != t.shape() {
        return Err(Error::Shape(format!(
            "identity pair shapes differ: {:?} vs {:?}",
            t2t.shape(),
            t.shape()
        )));
    }
    let (l_adv, g_adv) = bce_batch(d_on_s2t, y_real);
    let (l_idt, mut g_idt) = l1_mean(t2t, t);
    g_idt.scale(T::c(0.5 * lambda));
    Ok((
        LossBundle {
            l_dis: 0.0,
            l_adv,
            l_idt,
            l_cyc: None,
            lambda,
        },
        g_adv,
        g_idt,
    ))
}

/// One direction of the bidirectional loss: adversarial BCE for the reverse
/// generator (`D_S(T2S)` driven toward the real label), `0.5 λ` identity term
/// on `S2S`, and `λ_cyc` cycle term on `S2T2S`.
///
/// Returns the bundle plus gradients w.r.t. the discriminator probabilities,
/// `S2S` (scaled `0.5 λ`), and `S2T2S` (scaled `λ_cyc`).
#[allow(clippy::too_many_arguments)]
pub fn istn_loss_bi<T: Scalar>(
    d_s_on_t2s: &[T],
    y_real: &[f64],
    s2s: &Tensor<T>,
    s: &Tensor<T>,
    s2t2s: &Tensor<T>,
    lambda: f64,
    lambda_cycle: f64,
) -> Result<(LossBundle, Vec<T>, Tensor<T>, Tensor<T>)> {
    if s2s.shape() != s.shape() || s2t2s.shape() != s.shape() {
        return Err(Error::Shape(format!(
            "bidirectional shapes differ: {:?} / {:?} vs {:?}",
            s2s.shape(),
            s2t2s.shape(),
            s.shape()
        )));
    }
    let (l_adv, g_adv) = bce_batch(d_s_on_t2s, y_real);
    let (l_idt, mut g_idt) = l1_mean(s2s, s);
    g_idt.scale(T::c(0.5 * lambda));
    let (l_cyc, mut g_cyc) = l1_mean(s2t2s, s);
    g_cyc.scale(T::c(lambda_cycle));
    Ok((
        LossBundle {
            l_dis: 0.0,
            l_adv,
            l_idt,
            l_cyc: Some(l_cyc),
            lambda,
        },
        g_adv,
        g_idt,
        g_cyc,
    ))
}
