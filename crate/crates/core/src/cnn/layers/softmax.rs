use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{batch_of, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise max-subtracted softmax of a `[N, K]` tensor.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 2 || logits.shape()[1] < 2 {
        return Err(Error::shape(format!("softmax expects [N, K>=2], got {:?}", logits.shape())));
    }
    let k = logits.shape()[1];
    let mut p = logits.clone();
    for row in p.data_mut().chunks_exact_mut(k) {
        softmax_in_place(row);
    }
    Ok(p)
}

/// Probabilities and `-ln p[label]` for one logit vector.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::shape(format!("softmax needs at least 2 logits, got {k}")));
    }
    if label >= k {
        return Err(Error::contract(format!("label {label} out of range for {k} classes")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { context: "non-finite logits".into(), partial_curve: Vec::new() });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let mut probs = logits.to_vec();
    softmax_in_place(&mut probs);
    Ok((log_sum - (logits[label] - max), probs))
}

#[derive(Debug, Clone)]
pub struct Softmax {
    shape: Vec<usize>,
}

impl Softmax {
    pub fn new(input: &[usize]) -> Result<Self> {
        if input.len() != 1 || input[0] < 2 {
            return Err(Error::shape(format!("softmax expects [K>=2] per sample, got {input:?}")));
        }
        Ok(Softmax { shape: input.to_vec() })
    }
}

impl Layer for Softmax {
    fn kind(&self) -> &'static str {
        "softmax"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Softmax
    }

    fn input_shape(&self) -> &[usize] {
        &self.shape
    }

    fn output_shape(&self) -> &[usize] {
        &self.shape
    }

    fn forward(&self, x: &Tensor, _params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        batch_of(x, &self.shape, "softmax")?;
        Ok((softmax_rows(x)?, Aux::None))
    }

    /// Full Jacobian-vector product `dx = p * (g - <g, p>)`. Training fuses
    /// softmax with the loss instead.
    fn backward(
        &self,
        _x: &Tensor,
        y: &Tensor,
        _aux: &Aux,
        grad_y: &Tensor,
        _params: Option<&ParamBlock>,
        need_input_grad: bool,
    ) -> Result<LayerGrads> {
        if !need_input_grad {
            return Ok(LayerGrads { input: None, params: None });
        }
        if grad_y.shape() != y.shape() {
            return Err(Error::shape("softmax backward shape mismatch"));
        }
        let k = self.shape[0];
        let mut dx = grad_y.clone();
        for (d, p) in dx.data_mut().chunks_exact_mut(k).zip(y.data().chunks_exact(k)) {
            let dot: f64 = d.iter().zip(p).map(|(a, b)| a * b).sum();
            for (di, pi) in d.iter_mut().zip(p) {
                *di = pi * (*di - dot);
            }
        }
        Ok(LayerGrads { input: Some(dx), params: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let (loss, p) = softmax_cross_entropy(&[0.3; 7], 4).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-12);
        assert!(p.iter().all(|v| (v - 1.0 / 7.0).abs() < 1e-15));
    }

    #[test]
    fn confident_logits() {
        let (loss, _) = softmax_cross_entropy(&[10.0, -10.0], 0).unwrap();
        // -ln sigmoid(20)
        assert!(loss < 1e-4);
        assert!((loss - (1.0 + (-20f64).exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn shift_invariance() {
        let z = [0.1, -2.0, 3.5, 0.7];
        let shifted: Vec<f64> = z.iter().map(|v| v + 100.0).collect();
        let (l1, p1) = softmax_cross_entropy(&z, 2).unwrap();
        let (l2, p2) = softmax_cross_entropy(&shifted, 2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn label_out_of_range() {
        assert!(softmax_cross_entropy(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn huge_logits_stay_finite() {
        let (loss, p) = softmax_cross_entropy(&[1000.0, -1000.0, 0.0], 1).unwrap();
        assert!((loss - 2000.0).abs() < 1e-9);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
