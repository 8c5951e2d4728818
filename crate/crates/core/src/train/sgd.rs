use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::{lit, Scalar, Tensor};

/// Momentum buffers, one per parameter tensor, created on first use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SgdState<T = f32> {
    pub velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new() -> Self {
        Self { velocity: Vec::new() }
    }
}

/// `g' = g + wd·w; v ← μ·v + g'; w ← w − lr·v` over parallel lists.
/// Nothing is modified when any gradient is non-finite.
pub fn sgd_step_tensors<T: Scalar>(
    params: &mut [(alloc::string::String, &mut Tensor<T>)],
    grads: &[(alloc::string::String, &Tensor<T>)],
    state: &mut SgdState<T>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Contract(alloc::format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for ((pn, p), (gn, g)) in params.iter().zip(grads) {
        if pn != gn || p.shape() != g.shape() {
            return Err(Error::Contract(alloc::format!(
                "parameter `{}` {:?} paired with gradient `{}` {:?}",
                pn,
                p.shape(),
                gn,
                g.shape()
            )));
        }
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient { name: gn.clone() });
        }
    }
    if state.velocity.is_empty() {
        state.velocity = params.iter().map(|(_, p)| Tensor::zeros(p.shape())).collect();
    }
    if state.velocity.len() != params.len() {
        return Err(Error::Contract("optimizer state does not match the parameters".into()));
    }
    let (lr, mu, wd): (T, T, T) = (lit(lr), lit(momentum), lit(weight_decay));
    for (((_, p), (_, g)), v) in params.iter_mut().zip(grads).zip(state.velocity.iter_mut()) {
        for ((w, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vv = mu * *vv + gv + wd * *w;
            *w -= lr * *vv;
        }
    }
    Ok(())
}

/// One optimizer step on every learnable tensor of a model.
pub fn sgd_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut SgdState<T>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    let g = grads.params();
    let mut p = params.params_mut();
    sgd_step_tensors(&mut p, &g, state, lr, momentum, weight_decay)
}
