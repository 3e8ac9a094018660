use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::{batch_of, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

fn check_keep(keep: f64) -> Result<()> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(Error::param(format!("dropout keep must be in (0, 1], got {keep}")));
    }
    Ok(())
}

fn fill_mask(mask: &mut [f64], keep: f64, rng: &mut Rng) {
    let scale = 1.0 / keep;
    for m in mask {
        *m = if rng.bernoulli(keep) { scale } else { 0.0 };
    }
}

/// Inverted dropout on a whole tensor. The mask holds `1/keep` for kept
/// elements and 0 for dropped ones; it is all ones outside training or when
/// `keep == 1`.
pub fn dropout_forward(x: &Tensor, keep: f64, rng: &mut Rng, training: bool) -> Result<(Tensor, Vec<f64>)> {
    check_keep(keep)?;
    let mut mask = vec![1.0; x.len()];
    if training && keep < 1.0 {
        fill_mask(&mut mask, keep, rng);
    }
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((y, mask))
}

/// Each sample draws its mask from `Rng(seed).child(layer).child(sample)`,
/// where `sample` counts from the start of the minibatch,
/// so the result does not depend on how a batch is split up.
#[derive(Debug, Clone)]
pub struct Dropout {
    keep: f64,
    shape: Vec<usize>,
}

impl Dropout {
    pub fn new(keep: f64, input: &[usize]) -> Result<Self> {
        check_keep(keep)?;
        Ok(Dropout { keep, shape: input.to_vec() })
    }

    pub(crate) fn from_spec(spec: &LayerSpec, input: &[usize]) -> Result<Self> {
        match *spec {
            LayerSpec::Dropout { keep } => Dropout::new(keep, input),
            _ => Err(Error::contract("dropout builder got a different layer spec")),
        }
    }
}

impl Layer for Dropout {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Dropout { keep: self.keep }
    }

    fn input_shape(&self) -> &[usize] {
        &self.shape
    }

    fn output_shape(&self) -> &[usize] {
        &self.shape
    }

    fn forward(&self, x: &Tensor, _params: Option<&ParamBlock>, ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        batch_of(x, &self.shape, "dropout")?;
        if !ctx.training || self.keep == 1.0 {
            return Ok((x.clone(), Aux::None));
        }
        let per: usize = self.shape.iter().product();
        let layer_rng = Rng::new(ctx.seed).child(ctx.layer_index as u64);
        let mut mask = vec![0.0; x.len()];
        for (s, chunk) in mask.chunks_exact_mut(per).enumerate() {
            fill_mask(chunk, self.keep, &mut layer_rng.child((ctx.sample_offset + s) as u64));
        }
        let mut y = x.clone();
        for (v, m) in y.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        Ok((y, Aux::Mask(mask)))
    }

    fn backward(
        &self,
        x: &Tensor,
        _y: &Tensor,
        aux: &Aux,
        grad_y: &Tensor,
        _params: Option<&ParamBlock>,
        need_input_grad: bool,
    ) -> Result<LayerGrads> {
        if !need_input_grad {
            return Ok(LayerGrads { input: None, params: None });
        }
        let mut dx = grad_y.clone();
        match aux {
            Aux::None => {}
            Aux::Mask(mask) if mask.len() == x.len() && grad_y.len() == x.len() => {
                for (d, m) in dx.data_mut().iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            _ => return Err(Error::contract("dropout mask does not match this batch")),
        }
        Ok(LayerGrads { input: Some(dx), params: None })
    }
}
