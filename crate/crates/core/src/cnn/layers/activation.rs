use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{batch_of, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn check_grad(x: &Tensor, grad_y: &Tensor, what: &str) -> Result<()> {
    if x.shape() != grad_y.shape() {
        return Err(Error::shape(format!("{what} backward grad {:?} vs input {:?}", grad_y.shape(), x.shape())));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Relu {
    shape: Vec<usize>,
}

impl Relu {
    pub fn new(input: &[usize]) -> Self {
        Relu { shape: input.to_vec() }
    }
}

impl Layer for Relu {
    fn kind(&self) -> &'static str {
        "relu"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Relu
    }

    fn input_shape(&self) -> &[usize] {
        &self.shape
    }

    fn output_shape(&self) -> &[usize] {
        &self.shape
    }

    fn forward(&self, x: &Tensor, _params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        batch_of(x, &self.shape, "relu")?;
        Ok((relu(x), Aux::None))
    }

    fn backward(
        &self,
        x: &Tensor,
        _y: &Tensor,
        _aux: &Aux,
        grad_y: &Tensor,
        _params: Option<&ParamBlock>,
        need_input_grad: bool,
    ) -> Result<LayerGrads> {
        if !need_input_grad {
            return Ok(LayerGrads { input: None, params: None });
        }
        check_grad(x, grad_y, "relu")?;
        let mut dx = grad_y.clone();
        for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
            if v <= 0.0 {
                *d = 0.0;
            }
        }
        Ok(LayerGrads { input: Some(dx), params: None })
    }
}

/// Logistic activation, used by the small back-propagation baseline network.
#[derive(Debug, Clone)]
pub struct Sigmoid {
    shape: Vec<usize>,
}

impl Sigmoid {
    pub fn new(input: &[usize]) -> Self {
        Sigmoid { shape: input.to_vec() }
    }
}

impl Layer for Sigmoid {
    fn kind(&self) -> &'static str {
        "sigmoid"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Sigmoid
    }

    fn input_shape(&self) -> &[usize] {
        &self.shape
    }

    fn output_shape(&self) -> &[usize] {
        &self.shape
    }

    fn forward(&self, x: &Tensor, _params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        batch_of(x, &self.shape, "sigmoid")?;
        Ok((x.map(sigmoid), Aux::None))
    }

    fn backward(
        &self,
        x: &Tensor,
        y: &Tensor,
        _aux: &Aux,
        grad_y: &Tensor,
        _params: Option<&ParamBlock>,
        need_input_grad: bool,
    ) -> Result<LayerGrads> {
        if !need_input_grad {
            return Ok(LayerGrads { input: None, params: None });
        }
        check_grad(x, grad_y, "sigmoid")?;
        let mut dx = grad_y.clone();
        for (d, &s) in dx.data_mut().iter_mut().zip(y.data()) {
            *d *= s * (1.0 - s);
        }
        Ok(LayerGrads { input: Some(dx), params: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let neg = Tensor::from_vec(&[3], vec![-1.0, -0.5, -7.0]).unwrap();
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let pos = Tensor::from_vec(&[3], vec![0.0, 0.5, 7.0]).unwrap();
        assert_eq!(relu(&pos), pos);
        let mixed = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&mixed).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
