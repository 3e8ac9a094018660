use crate::error::{Error, Result};
use crate::tensor::{gemm, MatRef, Tensor};

use super::{batch_of, require_params, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

/// Fully connected layer: `y = x W + b` with `W [inputs, units]`.
#[derive(Debug, Clone)]
pub struct Dense {
    input: Vec<usize>,
    output: Vec<usize>,
}

impl Dense {
    pub fn new(inputs: usize, units: usize) -> Result<Self> {
        if inputs == 0 || units == 0 {
            return Err(Error::shape("dense needs non-empty input and output"));
        }
        Ok(Dense { input: vec![inputs], output: vec![units] })
    }

    pub(crate) fn from_spec(spec: &LayerSpec, input: &[usize]) -> Result<Self> {
        let LayerSpec::Dense { units } = *spec else {
            return Err(Error::contract("dense builder got a different layer spec"));
        };
        if input.len() != 1 {
            return Err(Error::shape(format!("dense expects a flat input, got {input:?}; add a flatten layer")));
        }
        Dense::new(input[0], units)
    }

    fn dims(&self) -> (usize, usize) {
        (self.input[0], self.output[0])
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Dense { units: self.output[0] }
    }

    fn input_shape(&self) -> &[usize] {
        &self.input
    }

    fn output_shape(&self) -> &[usize] {
        &self.output
    }

    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        let (d, m) = self.dims();
        Some((vec![d, m], vec![m]))
    }

    fn fan_in(&self) -> usize {
        self.input[0]
    }

    fn forward(&self, x: &Tensor, params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        let p = require_params(params, "dense")?;
        let (d, m) = self.dims();
        if p.weight.shape() != [d, m] || p.bias.shape() != [m] {
            return Err(Error::shape(format!("dense params {:?}/{:?} for {d}->{m}", p.weight.shape(), p.bias.shape())));
        }
        let n = batch_of(x, &self.input, "dense")?;
        let mut out = Tensor::zeros(&[n, m])?;
        for row in out.data_mut().chunks_exact_mut(m) {
            row.copy_from_slice(p.bias.data());
        }
        gemm(MatRef::new(x.data(), n, d), MatRef::new(p.weight.data(), d, m), 1.0, out.data_mut());
        Ok((out, Aux::None))
    }

    fn backward(
        &self,
        x: &Tensor,
        _y: &Tensor,
        _aux: &Aux,
        grad_y: &Tensor,
        params: Option<&ParamBlock>,
        need_input_grad: bool,
    ) -> Result<LayerGrads> {
        let p = require_params(params, "dense")?;
        let (d, m) = self.dims();
        let n = batch_of(x, &self.input, "dense")?;
        if grad_y.shape() != [n, m] {
            return Err(Error::shape(format!("dense backward grad {:?}, expected [{n}, {m}]", grad_y.shape())));
        }
        let mut dw = Tensor::zeros(&[d, m])?;
        gemm(MatRef::new(x.data(), n, d).t(), MatRef::new(grad_y.data(), n, m), 0.0, dw.data_mut());
        let mut db = Tensor::zeros(&[m])?;
        for row in grad_y.data().chunks_exact(m) {
            for (b, g) in db.data_mut().iter_mut().zip(row) {
                *b += g;
            }
        }
        let dx = if need_input_grad {
            let mut dx = Tensor::zeros(&[n, d])?;
            gemm(MatRef::new(grad_y.data(), n, m), MatRef::new(p.weight.data(), d, m).t(), 0.0, dx.data_mut());
            Some(dx)
        } else {
            None
        };
        Ok(LayerGrads { input: dx, params: Some(ParamBlock { weight: dw, bias: db }) })
    }
}

/// Single-sample `x W + b` for `x [n]`, `W [n, m]`, `b [m]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if x.rank() != 1 || w.rank() != 2 || w.shape()[0] != x.len() || b.shape() != [w.shape()[1]] {
        return Err(Error::shape(format!(
            "dense shapes x {:?}, w {:?}, b {:?} do not line up",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let layer = Dense::new(x.len(), w.shape()[1])?;
    let params = ParamBlock { weight: w.clone(), bias: b.clone() };
    let (y, _) = layer.forward(&x.clone().reshape(&[1, x.len()])?, Some(&params), &ForwardCtx::default())?;
    y.reshape(&[w.shape()[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_normal, Rng};

    #[test]
    fn identity_weights() {
        let x = Tensor::from_vec(&[3], vec![1.5, -2.0, 0.25]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]).unwrap();
        for i in 0..3 {
            w.set(&[i, i], 1.0).unwrap();
        }
        assert_eq!(dense_forward(&x, &w, &Tensor::zeros(&[3]).unwrap()).unwrap(), x);
    }

    #[test]
    fn hand_arithmetic() {
        let x = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap();
        assert_eq!(dense_forward(&x, &w, &b).unwrap().data(), &[2.0, 3.0]);
    }

    #[test]
    fn matches_dot_products() {
        let mut rng = Rng::new(3);
        let x = rng_normal(&mut rng, 0.0, 1.0, &[8]).unwrap();
        let w = rng_normal(&mut rng, 0.0, 1.0, &[8, 5]).unwrap();
        let b = rng_normal(&mut rng, 0.0, 1.0, &[5]).unwrap();
        let y = dense_forward(&x, &w, &b).unwrap();
        for j in 0..5 {
            let dot: f64 = (0..8).map(|i| x.data()[i] * w.data()[i * 5 + j]).sum::<f64>() + b.data()[j];
            assert!((y.data()[j] - dot).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        let x = Tensor::zeros(&[4]).unwrap();
        assert!(dense_forward(&x, &Tensor::zeros(&[3, 2]).unwrap(), &Tensor::zeros(&[2]).unwrap()).is_err());
    }
}
