use crate::error::{Error, Result};
use crate::tensor::{gemm, MatRef, Tensor};

use super::{batch_of, batched, require_params, Aux, ForwardCtx, Layer, LayerGrads};
use crate::cnn::params::ParamBlock;
use crate::cnn::spec::LayerSpec;

/// Valid stride-1 convolution on `[h, w, c]` maps with `[k, k, c, f]` weights.
#[derive(Debug, Clone)]
pub struct Conv2d {
    kernel: usize,
    filters: usize,
    input: Vec<usize>,
    output: Vec<usize>,
}

impl Conv2d {
    pub fn new(kernel: usize, filters: usize, input: &[usize]) -> Result<Self> {
        if input.len() != 3 {
            return Err(Error::shape(format!("conv expects [h, w, c] input, got {input:?}")));
        }
        let (h, w) = (input[0], input[1]);
        if h < kernel || w < kernel {
            return Err(Error::shape(format!("conv kernel {kernel} larger than input {h}x{w}")));
        }
        Ok(Conv2d { kernel, filters, input: input.to_vec(), output: vec![h - kernel + 1, w - kernel + 1, filters] })
    }

    pub(crate) fn from_spec(spec: &LayerSpec, input: &[usize]) -> Result<Self> {
        match *spec {
            LayerSpec::Conv { kernel, filters } => Conv2d::new(kernel, filters, input),
            _ => Err(Error::contract("conv builder got a different layer spec")),
        }
    }

    fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.input[2]
    }

    fn positions(&self) -> usize {
        self.output[0] * self.output[1]
    }

    /// Rows of `cols` are flattened `[k, k, c]` patches, one per output pixel.
    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let (w, c) = (self.input[1], self.input[2]);
        let (ho, wo) = (self.output[0], self.output[1]);
        let k = self.kernel;
        let row_len = k * c;
        let kk = self.patch_len();
        for i in 0..ho {
            for j in 0..wo {
                let row = &mut cols[(i * wo + j) * kk..(i * wo + j + 1) * kk];
                for u in 0..k {
                    let src = ((i + u) * w + j) * c;
                    row[u * row_len..(u + 1) * row_len].copy_from_slice(&x[src..src + row_len]);
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        let (w, c) = (self.input[1], self.input[2]);
        let (ho, wo) = (self.output[0], self.output[1]);
        let k = self.kernel;
        let row_len = k * c;
        let kk = self.patch_len();
        for i in 0..ho {
            for j in 0..wo {
                let row = &cols[(i * wo + j) * kk..(i * wo + j + 1) * kk];
                for u in 0..k {
                    let dst = ((i + u) * w + j) * c;
                    for (d, s) in dx[dst..dst + row_len].iter_mut().zip(&row[u * row_len..(u + 1) * row_len]) {
                        *d += s;
                    }
                }
            }
        }
    }

    fn check_params(&self, p: &ParamBlock) -> Result<()> {
        let (ws, bs) = self.param_shapes().expect("conv has params");
        if p.weight.shape() != ws || p.bias.shape() != bs {
            return Err(Error::shape(format!(
                "conv params {:?}/{:?}, expected {ws:?}/{bs:?}",
                p.weight.shape(),
                p.bias.shape()
            )));
        }
        Ok(())
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> &'static str {
        "conv"
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::Conv { kernel: self.kernel, filters: self.filters }
    }

    fn input_shape(&self) -> &[usize] {
        &self.input
    }

    fn output_shape(&self) -> &[usize] {
        &self.output
    }

    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        Some((vec![self.kernel, self.kernel, self.input[2], self.filters], vec![self.filters]))
    }

    fn fan_in(&self) -> usize {
        self.patch_len()
    }

    fn forward(&self, x: &Tensor, params: Option<&ParamBlock>, _ctx: &ForwardCtx) -> Result<(Tensor, Aux)> {
        let p = require_params(params, "conv")?;
        self.check_params(p)?;
        let n = batch_of(x, &self.input, "conv")?;
        let in_len: usize = self.input.iter().product();
        let (pos, kk, f) = (self.positions(), self.patch_len(), self.filters);
        let mut out = Tensor::zeros(&batched(n, &self.output))?;
        let mut cols = vec![0.0; pos * kk];
        let bias = p.bias.data();
        for (xs, ys) in x.data().chunks_exact(in_len).zip(out.data_mut().chunks_exact_mut(pos * f)) {
            self.im2col(xs, &mut cols);
            for row in ys.chunks_exact_mut(f) {
                row.copy_from_slice(bias);
            }
            gemm(MatRef::new(&cols, pos, kk), MatRef::new(p.weight.data(), kk, f), 1.0, ys);
        }
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
        let p = require_params(params, "conv")?;
        let n = batch_of(x, &self.input, "conv")?;
        if batch_of(grad_y, &self.output, "conv backward")? != n {
            return Err(Error::shape("conv backward batch mismatch"));
        }
        let in_len: usize = self.input.iter().product();
        let (pos, kk, f) = (self.positions(), self.patch_len(), self.filters);
        let mut dw = Tensor::zeros_like(&p.weight);
        let mut db = Tensor::zeros_like(&p.bias);
        let mut dx = if need_input_grad { Some(Tensor::zeros_like(x)) } else { None };
        let mut cols = vec![0.0; pos * kk];
        let mut dcols = if need_input_grad { vec![0.0; pos * kk] } else { Vec::new() };
        for (s, (xs, gs)) in x.data().chunks_exact(in_len).zip(grad_y.data().chunks_exact(pos * f)).enumerate() {
            self.im2col(xs, &mut cols);
            gemm(MatRef::new(&cols, pos, kk).t(), MatRef::new(gs, pos, f), 1.0, dw.data_mut());
            for row in gs.chunks_exact(f) {
                for (b, g) in db.data_mut().iter_mut().zip(row) {
                    *b += g;
                }
            }
            if let Some(dx) = dx.as_mut() {
                gemm(MatRef::new(gs, pos, f), MatRef::new(p.weight.data(), kk, f).t(), 0.0, &mut dcols);
                self.col2im(&dcols, &mut dx.data_mut()[s * in_len..(s + 1) * in_len]);
            }
        }
        Ok(LayerGrads { input: dx, params: Some(ParamBlock { weight: dw, bias: db }) })
    }
}

/// Single-sample valid convolution: `x [h, w, c]`, `w [k, k, c, f]`, `b [f]`.
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let ws = w.shape();
    if ws.len() != 4 || ws[0] != ws[1] {
        return Err(Error::shape(format!("conv weights must be [k, k, c, f], got {ws:?}")));
    }
    if x.rank() != 3 || x.shape()[2] != ws[2] {
        return Err(Error::shape(format!("conv input {:?} does not match weights {ws:?}", x.shape())));
    }
    if b.shape() != [ws[3]] {
        return Err(Error::shape(format!("conv bias {:?} for {} filters", b.shape(), ws[3])));
    }
    let layer = Conv2d::new(ws[0], ws[3], x.shape())?;
    let xb = x.clone().reshape(&batched(1, x.shape()))?;
    let params = ParamBlock { weight: w.clone(), bias: b.clone() };
    let (y, _) = layer.forward(&xb, Some(&params), &ForwardCtx::default())?;
    y.reshape(layer.output_shape())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_normal, Rng};

    fn naive(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        let (h, wd, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (k, f) = (w.shape()[0], w.shape()[3]);
        let (ho, wo) = (h - k + 1, wd - k + 1);
        let mut out = Tensor::zeros(&[ho, wo, f]).unwrap();
        for i in 0..ho {
            for j in 0..wo {
                for ff in 0..f {
                    let mut acc = b.data()[ff];
                    for u in 0..k {
                        for v in 0..k {
                            for cc in 0..c {
                                acc += x.get(&[i + u, j + v, cc]).unwrap() * w.get(&[u, v, cc, ff]).unwrap();
                            }
                        }
                    }
                    out.set(&[i, j, ff], acc).unwrap();
                }
            }
        }
        out
    }

    #[test]
    fn matches_quadruple_loop() {
        let mut rng = Rng::new(10);
        for (c, f) in [(1, 1), (2, 3), (3, 4)] {
            let x = rng_normal(&mut rng, 0.0, 1.0, &[5, 5, c]).unwrap();
            let w = rng_normal(&mut rng, 0.0, 1.0, &[3, 3, c, f]).unwrap();
            let b = rng_normal(&mut rng, 0.0, 1.0, &[f]).unwrap();
            let got = conv2d_forward(&x, &w, &b).unwrap();
            assert_eq!(got.shape(), &[3, 3, f]);
            assert!(got.max_abs_diff(&naive(&x, &w, &b)) < 1e-12);
        }
    }

    #[test]
    fn identity_kernel() {
        let mut rng = Rng::new(2);
        let x = rng_normal(&mut rng, 0.0, 1.0, &[4, 6, 1]).unwrap();
        let w = Tensor::new(&[1, 1, 1, 1], 1.0).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        assert_eq!(conv2d_forward(&x, &w, &b).unwrap(), x);
    }

    #[test]
    fn first_layer_shape() {
        let x = Tensor::zeros(&[188, 188, 1]).unwrap();
        let w = Tensor::zeros(&[3, 3, 1, 16]).unwrap();
        let b = Tensor::zeros(&[16]).unwrap();
        assert_eq!(conv2d_forward(&x, &w, &b).unwrap().shape(), &[186, 186, 16]);
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::zeros(&[5, 5, 2]).unwrap();
        let w = Tensor::zeros(&[3, 3, 1, 4]).unwrap();
        let b = Tensor::zeros(&[4]).unwrap();
        assert!(matches!(conv2d_forward(&x, &w, &b), Err(Error::Shape(_))));
        let small = Tensor::zeros(&[2, 2, 1]).unwrap();
        assert!(conv2d_forward(&small, &Tensor::zeros(&[3, 3, 1, 1]).unwrap(), &Tensor::zeros(&[1]).unwrap()).is_err());
    }
}
