use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{batch_of, batched, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

/// Max pooling over square windows, per channel. Windows may overlap.
#[derive(Debug, Clone)]
pub struct MaxPool {
    window: usize,
    stride: usize,
    input: Vec<usize>,
    output: Vec<usize>,
}

impl MaxPool {
    pub fn new(window: usize, stride: usize, input: &[usize]) -> Result<Self> {
        if input.len() != 3 {
            return Err(Error::shape(format!("maxpool expects [h, w, c] input, got {input:?}")));
        }
        if input[0] < window || input[1] < window {
            return Err(Error::contract(format!(
                "maxpool window {window} larger than input {}x{}",
                input[0], input[1]
            )));
        }
        let out = |e: usize| (e - window) / stride + 1;
        Ok(MaxPool { window, stride, input: input.to_vec(), output: vec![out(input[0]), out(input[1]), input[2]] })
    }

    pub(crate) fn from_spec(spec: &LayerSpec, input: &[usize]) -> Result<Self> {
        match *spec {
            LayerSpec::MaxPool { window, stride } => MaxPool::new(window, stride, input),
            _ => Err(Error::contract("maxpool builder got a different layer spec")),
        }
    }
}

impl Layer for MaxPool {
    fn kind(&self) -> &'static str {
        "maxpool"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::MaxPool { window: self.window, stride: self.stride }
    }

    fn input_shape(&self) -> &[usize] {
        &self.input
    }

    fn output_shape(&self) -> &[usize] {
        &self.output
    }

    fn forward(&self, x: &Tensor, _params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        let n = batch_of(x, &self.input, "maxpool")?;
        let (w, c) = (self.input[1], self.input[2]);
        let (ho, wo) = (self.output[0], self.output[1]);
        let in_len: usize = self.input.iter().product();
        let out_len: usize = self.output.iter().product();
        let mut out = Tensor::zeros(&batched(n, &self.output))?;
        let mut argmax = vec![0u32; n * out_len];
        let mut best = vec![0.0f64; c];
        let mut idx = vec![0u64; c];
        for s in 0..n {
            let xs = &x.data()[s * in_len..(s + 1) * in_len];
            for oi in 0..ho {
                for oj in 0..wo {
                    best.fill(f64::NEG_INFINITY);
                    for u in 0..self.window {
                        for v in 0..self.window {
                            let base = ((oi * self.stride + u) * w + oj * self.stride + v) * c;
                            let at = base as u64;
                            for (ch, ((b, i), &val)) in
                                best.iter_mut().zip(idx.iter_mut()).zip(&xs[base..base + c]).enumerate()
                            {
                                // strict comparison: ties keep the first position
                                let take = val > *b;
                                *b = if take { val } else { *b };
                                *i = if take { at + ch as u64 } else { *i };
                            }
                        }
                    }
                    let o = s * out_len + (oi * wo + oj) * c;
                    out.data_mut()[o..o + c].copy_from_slice(&best);
                    for (a, &i) in argmax[o..o + c].iter_mut().zip(&idx) {
                        *a = i as u32;
                    }
                }
            }
        }
        Ok((out, Aux::Argmax(argmax)))
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
        let Aux::Argmax(argmax) = aux else {
            return Err(Error::contract("maxpool backward without argmax cache"));
        };
        let n = batch_of(x, &self.input, "maxpool")?;
        let in_len: usize = self.input.iter().product();
        let out_len: usize = self.output.iter().product();
        if argmax.len() != n * out_len || grad_y.len() != n * out_len {
            return Err(Error::contract("maxpool cache does not match this batch"));
        }
        let mut dx = Tensor::zeros_like(x);
        let d = dx.data_mut();
        for s in 0..n {
            for o in s * out_len..(s + 1) * out_len {
                d[s * in_len + argmax[o] as usize] += grad_y.data()[o];
            }
        }
        Ok(LayerGrads { input: Some(dx), params: None })
    }
}

/// Single-sample max pooling; returns the pooled map and, per output
/// element, the flat offset of its winning input element.
pub fn maxpool_forward(x: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let layer = MaxPool::new(window, stride, x.shape())?;
    let (y, aux) = layer.forward(&x.clone().reshape(&batched(1, x.shape()))?, None, &ForwardCtx::default())?;
    let Aux::Argmax(idx) = aux else { unreachable!("maxpool always records argmax") };
    Ok((y.reshape(layer.output_shape())?, idx.into_iter().map(|i| i as usize).collect()))
}
