//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::real::Real;

use super::mlp::{Gradients, MlpParams};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamHyper<R> {
    pub lr: R,
    pub beta1: R,
    pub beta2: R,
    pub eps: R,
}

impl<R: Real> AdamHyper<R> {
    pub fn with_lr(lr: R) -> Self {
        AdamHyper {
            lr,
            beta1: R::of(0.9),
            beta2: R::of(0.999),
            eps: R::of(1e-8),
        }
    }
}

impl<R: Real> Default for AdamHyper<R> {
    fn default() -> Self {
        Self::with_lr(R::of(0.001))
    }
}

/// First/second moment accumulators for one flat parameter block.
#[derive(Debug, Clone)]
pub struct AdamState<R> {
    pub m: Vec<Vec<R>>,
    pub v: Vec<Vec<R>>,
    pub step: u64,
    pub hyper: AdamHyper<R>,
}

impl<R: Real> AdamState<R> {
    /// One block per tensor, in the order (W_1, b_1, W_2, b_2, ...).
    pub fn for_params(params: &MlpParams<R>, hyper: AdamHyper<R>) -> Self {
        let mut m = Vec::new();
        for (w, b) in params.weights.iter().zip(&params.biases) {
            m.push(vec![R::zero(); w.rows() * w.cols()]);
            m.push(vec![R::zero(); b.len()]);
        }
        AdamState {
            v: m.clone(),
            m,
            step: 0,
            hyper,
        }
    }

    /// Single flat block (used for ensemble head embeddings).
    pub fn for_flat(len: usize, hyper: AdamHyper<R>) -> Self {
        AdamState {
            m: vec![vec![R::zero(); len]],
            v: vec![vec![R::zero(); len]],
            step: 0,
            hyper,
        }
    }
}

/// Core elementwise update on one tensor.
fn update_block<R: Real>(
    params: &mut [R],
    grads: &[R],
    m: &mut [R],
    v: &mut [R],
    step: u64,
    h: &AdamHyper<R>,
) {
    let t = R::of(step as f64);
    let bc1 = R::one() - h.beta1.powf(t);
    let bc2 = R::one() - h.beta2.powf(t);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = h.beta1 * m[i] + (R::one() - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (R::one() - h.beta2) * g * g;
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        params[i] = params[i] - h.lr * mhat / (vhat.sqrt() + h.eps);
    }
}

/// Apply one Adam step to a network's parameters.
pub fn adam_step<R: Real>(
    params: &mut MlpParams<R>,
    grads: &Gradients<R>,
    state: &mut AdamState<R>,
) -> Result<()> {
    if !grads.is_finite() {
        let bad = grads
            .weights
            .iter()
            .position(|w| !w.is_finite())
            .map(|l| format!("weights[{l}]"))
            .or_else(|| {
                grads
                    .biases
                    .iter()
                    .position(|b| b.iter().any(|x| !x.is_finite()))
                    .map(|l| format!("biases[{l}]"))
            })
            .unwrap_or_else(|| "gradient".to_string());
        return Err(Error::NonFinite { what: bad });
    }
    state.step += 1;
    let step = state.step;
    let hyper = state.hyper.clone();
    for (l, (w, b)) in params.weights.iter_mut().zip(&mut params.biases).enumerate() {
        update_block(
            w.data_mut(),
            grads.weights[l].data(),
            &mut state.m[2 * l],
            &mut state.v[2 * l],
            step,
            &hyper,
        );
        update_block(
            b,
            &grads.biases[l],
            &mut state.m[2 * l + 1],
            &mut state.v[2 * l + 1],
            step,
            &hyper,
        );
    }
    Ok(())
}

/// Adam step on a raw flat block with its own state.
pub fn adam_step_flat<R: Real>(params: &mut [R], grads: &[R], state: &mut AdamState<R>) -> Result<()> {
    if grads.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "flat block".to_string(),
        });
    }
    state.step += 1;
    let step = state.step;
    let hyper = state.hyper.clone();
    update_block(params, grads, &mut state.m[0], &mut state.v[0], step, &hyper);
    Ok(())
}
