use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{batch_of, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

/// Across-channel local response normalization:
/// `y_c = x_c / (k + alpha * sum_{|c'-c| <= n/2} x_c'^2)^beta`,
/// with the channel window clamped at the ends. Channels are the last axis.
#[derive(Debug, Clone)]
pub struct Lrn {
    k: f64,
    n: usize,
    alpha: f64,
    beta: f64,
    shape: Vec<usize>,
}

impl Lrn {
    pub fn new(k: f64, n: usize, alpha: f64, beta: f64, input: &[usize]) -> Result<Self> {
        LayerSpec::Lrn { k, n, alpha, beta }.validate()?;
        if input.is_empty() {
            return Err(Error::shape("lrn needs a channel axis"));
        }
        Ok(Lrn { k, n, alpha, beta, shape: input.to_vec() })
    }

    pub(crate) fn from_spec(spec: &LayerSpec, input: &[usize]) -> Result<Self> {
        match *spec {
            LayerSpec::Lrn { k, n, alpha, beta } => Lrn::new(k, n, alpha, beta, input),
            _ => Err(Error::contract("lrn builder got a different layer spec")),
        }
    }

    fn channels(&self) -> usize {
        *self.shape.last().expect("non-empty shape")
    }

    /// `s^-beta`, without `powf` for the common exponents.
    #[inline]
    fn inv_pow(&self, s: f64) -> f64 {
        if self.beta == 0.75 {
            let r = s.sqrt();
            1.0 / (r * r.sqrt())
        } else if self.beta == 0.5 {
            1.0 / s.sqrt()
        } else {
            s.powf(-self.beta)
        }
    }

    fn window(&self, c: usize) -> std::ops::Range<usize> {
        let half = self.n / 2;
        c.saturating_sub(half)..(c + half + 1).min(self.channels())
    }
}

impl Layer for Lrn {
    fn kind(&self) -> &'static str {
        "lrn"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Lrn { k: self.k, n: self.n, alpha: self.alpha, beta: self.beta }
    }

    fn input_shape(&self) -> &[usize] {
        &self.shape
    }

    fn output_shape(&self) -> &[usize] {
        &self.shape
    }

    fn forward(&self, x: &Tensor, _params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        batch_of(x, &self.shape, "lrn")?;
        let c = self.channels();
        let mut out = Tensor::zeros_like(x);
        let mut scale = vec![0.0; x.len()];
        let mut sq = vec![0.0; c];
        for ((xs, ys), ss) in
            x.data().chunks_exact(c).zip(out.data_mut().chunks_exact_mut(c)).zip(scale.chunks_exact_mut(c))
        {
            for (q, v) in sq.iter_mut().zip(xs) {
                *q = v * v;
            }
            for ch in 0..c {
                let sumsq: f64 = sq[self.window(ch)].iter().sum();
                let s = self.k + self.alpha * sumsq;
                ss[ch] = s;
                ys[ch] = xs[ch] * self.inv_pow(s);
            }
        }
        Ok((out, Aux::Scale(scale)))
    }

    fn backward(
        &self,
        x: &Tensor,
        y: &Tensor,
        aux: &Aux,
        grad_y: &Tensor,
        _params: Option<&ParamBlock>,
        need_input_grad: bool,
    ) -> Result<LayerGrads> {
        if !need_input_grad {
            return Ok(LayerGrads { input: None, params: None });
        }
        let Aux::Scale(scale) = aux else {
            return Err(Error::contract("lrn backward without scale cache"));
        };
        if scale.len() != x.len() || y.len() != x.len() || grad_y.len() != x.len() {
            return Err(Error::contract("lrn cache does not match this batch"));
        }
        let c = self.channels();
        let mut dx = Tensor::zeros_like(x);
        let mut t = vec![0.0; c];
        let coef = 2.0 * self.alpha * self.beta;
        for ((((xs, ys), gs), ss), ds) in x
            .data()
            .chunks_exact(c)
            .zip(y.data().chunks_exact(c))
            .zip(grad_y.data().chunks_exact(c))
            .zip(scale.chunks_exact(c))
            .zip(dx.data_mut().chunks_exact_mut(c))
        {
            for ch in 0..c {
                t[ch] = gs[ch] * ys[ch] / ss[ch];
            }
            for j in 0..c {
                // the clamped window is symmetric: j in N(c) iff c in N(j)
                let cross: f64 = t[self.window(j)].iter().sum();
                ds[j] = gs[j] * self.inv_pow(ss[j]) - coef * xs[j] * cross;
            }
        }
        Ok(LayerGrads { input: Some(dx), params: None })
    }
}

/// Single-sample LRN over the last axis.
pub fn lrn_forward(x: &Tensor, k: f64, n: usize, alpha: f64, beta: f64) -> Result<Tensor> {
    let layer = Lrn::new(k, n, alpha, beta, x.shape())?;
    let mut shape = vec![1];
    shape.extend_from_slice(x.shape());
    let (y, _) = layer.forward(&x.clone().reshape(&shape)?, None, &ForwardCtx::default())?;
    y.reshape(x.shape())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_normal, Rng};

    #[test]
    fn alpha_zero_k_one_is_identity() {
        let x = rng_normal(&mut Rng::new(1), 0.0, 3.0, &[4, 4, 6]).unwrap();
        assert_eq!(lrn_forward(&x, 1.0, 5, 0.0, 0.75).unwrap(), x);
    }

    #[test]
    fn scalar_evaluation() {
        let x = Tensor::new(&[1, 1, 1], 2.0).unwrap();
        let y = lrn_forward(&x, 2.0, 1, 1.0, 1.0).unwrap();
        assert!((y.data()[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clamped_window_by_hand() {
        // channels [1, 2, 3], n = 3, k = 1, alpha = 1, beta = 1
        let x = Tensor::from_vec(&[1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let y = lrn_forward(&x, 1.0, 3, 1.0, 1.0).unwrap();
        let expect = [1.0 / (1.0 + 1.0 + 4.0), 2.0 / (1.0 + 1.0 + 4.0 + 9.0), 3.0 / (1.0 + 4.0 + 9.0)];
        for (a, b) in y.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sign_preserved() {
        let x = rng_normal(&mut Rng::new(2), 0.0, 5.0, &[3, 3, 8]).unwrap();
        let y = lrn_forward(&x, 2.0, 5, 1e-4, 0.75).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert_eq!(a.signum(), b.signum());
        }
    }

    #[test]
    fn rejects_even_span() {
        assert!(Lrn::new(2.0, 4, 1e-4, 0.75, &[2, 2, 3]).is_err());
        assert!(Lrn::new(0.0, 5, 1e-4, 0.75, &[2, 2, 3]).is_err());
    }
}
