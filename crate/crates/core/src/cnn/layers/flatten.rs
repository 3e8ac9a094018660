use crate::error::Result;
use crate::tensor::Tensor;

use super::{batch_of, batched, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

/// `[N, ...]` to `[N, d]`, row-major.
#[derive(Debug, Clone)]
pub struct Flatten {
    input: Vec<usize>,
    output: Vec<usize>,
}

impl Flatten {
    pub fn new(input: &[usize]) -> Self {
        Flatten { input: input.to_vec(), output: vec![input.iter().product()] }
    }
}

impl Layer for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Flatten
    }

    fn input_shape(&self) -> &[usize] {
        &self.input
    }

    fn output_shape(&self) -> &[usize] {
        &self.output
    }

    fn forward(&self, x: &Tensor, _params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        let n = batch_of(x, &self.input, "flatten")?;
        Ok((x.clone().reshape(&batched(n, &self.output))?, Aux::None))
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
        let input = if need_input_grad { Some(grad_y.clone().reshape(x.shape())?) } else { None };
        Ok(LayerGrads { input, params: None })
    }
}
