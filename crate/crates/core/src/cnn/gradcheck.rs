//! Central finite-difference gradient checks for layers and whole networks.

use crate::error::{Error, Result};
use crate::rng::{rng_normal, Rng};
use crate::tensor::Tensor;

use super::layers::{ForwardCtx, Layer};
use super::network::Network;
use super::params::{ParamBlock, Parameters};

pub const STEP: f64 = 1e-5;

/// Denominator floor so exactly-zero gradients compare absolutely.
pub const FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
        self.checked += 1;
    }
}

fn coord(b: &mut ParamBlock, which: usize, i: usize) -> &mut f64 {
    let t = if which == 0 { &mut b.weight } else { &mut b.bias };
    &mut t.data_mut()[i]
}

fn central(mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    Ok((f(STEP)? - f(-STEP)?) / (2.0 * STEP))
}

/// Check one layer against the scalar `L = sum(r * y)` for a random `r`.
/// Every input element and every parameter is perturbed.
pub fn check_layer(
    layer: &dyn Layer,
    x: &Tensor,
    params: Option<&ParamBlock>,
    ctx: &ForwardCtx,
    rng: &mut Rng,
) -> Result<GradCheck> {
    let (y, aux) = layer.forward(x, params, ctx)?;
    let r = rng_normal(rng, 0.0, 1.0, y.shape())?;
    let grads = layer.backward(x, &y, &aux, &r, params, true)?;
    let objective = |x: &Tensor, p: Option<&ParamBlock>| -> Result<f64> {
        let (y, _) = layer.forward(x, p, ctx)?;
        Ok(y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
    };

    let mut out = GradCheck::default();
    let dx = grads.input.ok_or_else(|| Error::contract("layer returned no input gradient"))?;
    let mut xp = x.clone();
    for i in 0..x.len() {
        let base = xp.data()[i];
        let numeric = central(|h| {
            xp.data_mut()[i] = base + h;
            objective(&xp, params)
        })?;
        xp.data_mut()[i] = base;
        out.record(dx.data()[i], numeric);
    }

    if let Some(p) = params {
        let g = grads.params.ok_or_else(|| Error::contract("layer returned no parameter gradient"))?;
        let mut pp = p.clone();
        for which in 0..2 {
            let analytic = if which == 0 { &g.weight } else { &g.bias };
            for i in 0..analytic.len() {
                let base = *coord(&mut pp, which, i);
                let numeric = central(|h| {
                    *coord(&mut pp, which, i) = base + h;
                    objective(x, Some(&pp))
                })?;
                *coord(&mut pp, which, i) = base;
                out.record(analytic.data()[i], numeric);
            }
        }
    }
    Ok(out)
}

/// Check the mean cross-entropy gradients of a whole network. At most
/// `per_tensor` randomly chosen coordinates of each weight and bias tensor
/// are perturbed.
pub fn check_network(
    net: &Network,
    params: &Parameters,
    x: &Tensor,
    labels: &[usize],
    seed: u64,
    per_tensor: usize,
    rng: &mut Rng,
) -> Result<GradCheck> {
    let (_, grads) = net.loss_and_gradients(params, x, labels, seed)?;
    let loss = |p: &Parameters| -> Result<f64> {
        let tape = net.forward(p, x, true, seed)?;
        net.loss(&tape, labels)
    };
    let mut out = GradCheck::default();
    let mut pp = params.clone();
    for (layer, g) in grads.trainable() {
        for which in 0..2 {
            let analytic = if which == 0 { &g.weight } else { &g.bias };
            let mut coords: Vec<usize> = (0..analytic.len()).collect();
            rng.shuffle(&mut coords);
            coords.truncate(per_tensor);
            for i in coords {
                let base = *coord(pp.get_mut(layer).expect("trainable layer"), which, i);
                let numeric = central(|h| {
                    *coord(pp.get_mut(layer).expect("trainable layer"), which, i) = base + h;
                    loss(&pp)
                })?;
                *coord(pp.get_mut(layer).expect("trainable layer"), which, i) = base;
                out.record(analytic.data()[i], numeric);
            }
        }
    }
    Ok(out)
}
