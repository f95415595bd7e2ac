use super::GdConfig;
use crate::error::{Error, Result};
use crate::model::LinearNetwork;
use crate::objective::{layer_grads, loss_n, LpObjective};

/// One simultaneous step `W_j ← (1 − ηλ)·W_j − η·∂L^N/∂W_j` on every layer,
/// all gradients taken at the pre-step weights.
pub fn gd_step_deep(net: &LinearNetwork, obj: &LpObjective, config: &GdConfig) -> Result<LinearNetwork> {
    let grads = layer_grads(net, obj)?;
    let decay = 1.0 - config.eta() * config.lambda();
    let weights: Vec<_> = net
        .weights()
        .iter()
        .zip(&grads)
        .map(|(w, g)| {
            let mut next = w.scale(decay);
            next.axpy(-config.eta(), g);
            next
        })
        .collect();
    if !weights.iter().all(|w| w.is_finite()) {
        return Err(Error::Diverged {
            loss: loss_n(net, obj).unwrap_or(f64::NAN),
        });
    }
    Ok(net.with_weights(weights))
}
