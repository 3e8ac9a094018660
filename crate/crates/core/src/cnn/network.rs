use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::layers::{batched, softmax_cross_entropy, Aux, ForwardCtx, Layer, LayerRegistry};
use super::params::Parameters;
use super::spec::{LayerSpec, NetworkSpec};

/// Samples per pass in [`Network::predict`].
pub const INFER_CHUNK: usize = 4;

/// Built layer stack for a [`NetworkSpec`], with shapes inferred end to end.
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Box<dyn Layer>>,
}

/// Forward activations and whatever each layer cached for backward.
/// `activations[0]` is the input of layer `start`.
#[derive(Debug, Clone)]
pub struct Tape {
    start: usize,
    activations: Vec<Tensor>,
    aux: Vec<Aux>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("tape holds its input")
    }

    /// Input of layer `i` (or the network output for `i == layers`).
    pub fn activation(&self, i: usize) -> Option<&Tensor> {
        i.checked_sub(self.start).and_then(|j| self.activations.get(j))
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].shape()[0]
    }

    fn end(&self) -> usize {
        self.start + self.aux.len()
    }
}

impl std::fmt::Debug for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network").field("spec", &self.spec).finish()
    }
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        Self::with_registry(spec, &LayerRegistry::default())
    }

    pub fn with_registry(spec: NetworkSpec, registry: &LayerRegistry) -> Result<Self> {
        if spec.input.is_empty() || spec.input.contains(&0) {
            return Err(Error::shape(format!("bad network input shape {:?}", spec.input)));
        }
        if spec.layers.is_empty() {
            return Err(Error::shape("network has no layers"));
        }
        let mut shape = spec.input.clone();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, ls) in spec.layers.iter().enumerate() {
            let layer =
                registry.build(ls, &shape).map_err(|e| Error::shape(format!("layer {i} ({}): {e}", ls.kind())))?;
            shape = layer.output_shape().to_vec();
            layers.push(layer);
        }
        Ok(Network { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.spec.input
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers.last().expect("non-empty").output_shape()
    }

    fn ends_in_softmax(&self) -> bool {
        matches!(self.spec.layers.last(), Some(LayerSpec::Softmax))
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let s = x.shape();
        if s.len() != self.spec.input.len() + 1 || s[1..] != self.spec.input[..] || s[0] == 0 {
            return Err(Error::shape(format!("network expects [N, {:?}], got {s:?}", self.spec.input)));
        }
        Ok(s[0])
    }

    /// Full forward pass keeping every activation.
    pub fn forward(&self, params: &Parameters, x: &Tensor, training: bool, seed: u64) -> Result<Tape> {
        self.forward_at(params, x, training, seed, 0)
    }

    fn forward_at(&self, params: &Parameters, x: &Tensor, training: bool, seed: u64, offset: usize) -> Result<Tape> {
        self.check_input(x)?;
        params.check_against(self)?;
        self.run(params, x.clone(), 0..self.layers.len(), training, seed, offset)
    }

    /// Forward through `range`, keeping the tape.
    fn run(
        &self,
        params: &Parameters,
        x: Tensor,
        range: std::ops::Range<usize>,
        training: bool,
        seed: u64,
        offset: usize,
    ) -> Result<Tape> {
        let mut activations = Vec::with_capacity(range.len() + 1);
        let mut aux = Vec::with_capacity(range.len());
        activations.push(x);
        for i in range.clone() {
            let ctx = ForwardCtx { training, seed, layer_index: i, sample_offset: offset };
            let (y, a) = self.layers[i].forward(activations.last().expect("input"), params.get(i), &ctx)?;
            activations.push(y);
            aux.push(a);
        }
        Ok(Tape { start: range.start, activations, aux })
    }

    /// Inference-mode output, processed `chunk` samples at a time without
    /// keeping intermediates.
    pub fn infer(&self, params: &Parameters, x: &Tensor, chunk: usize) -> Result<Tensor> {
        let n = self.check_input(x)?;
        params.check_against(self)?;
        let per: usize = self.spec.input.iter().product();
        let out_shape = self.output_shape().to_vec();
        let out_per: usize = out_shape.iter().product();
        let mut out = Vec::with_capacity(n * out_per);
        let chunk = chunk.max(1);
        for start in (0..n).step_by(chunk) {
            let m = chunk.min(n - start);
            let mut a =
                Tensor::from_vec(&batched(m, &self.spec.input), x.data()[start * per..(start + m) * per].to_vec())?;
            for (i, layer) in self.layers.iter().enumerate() {
                let ctx = ForwardCtx { layer_index: i, ..ForwardCtx::default() };
                a = layer.forward(&a, params.get(i), &ctx)?.0;
            }
            out.extend_from_slice(a.data());
        }
        Tensor::from_vec(&batched(n, &out_shape), out)
    }

    /// Class index of the largest output per sample (first on ties).
    pub fn predict(&self, params: &Parameters, x: &Tensor) -> Result<Vec<usize>> {
        let probs = self.infer(params, x, INFER_CHUNK)?;
        Ok(argmax_rows(&probs))
    }

    /// Mean cross-entropy of the softmax output against `labels`.
    pub fn loss(&self, tape: &Tape, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(tape, labels)?;
        let k = logits.shape()[1];
        let mut total = 0.0;
        for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
            total += softmax_cross_entropy(row, label)?.0;
        }
        Ok(total / labels.len() as f64)
    }

    fn logits<'t>(&self, tape: &'t Tape, labels: &[usize]) -> Result<&'t Tensor> {
        if !self.ends_in_softmax() {
            return Err(Error::contract("loss needs a network ending in softmax"));
        }
        if tape.start != 0 || tape.end() != self.layers.len() || tape.activations.len() != tape.aux.len() + 1 {
            return Err(Error::contract("tape does not come from this network"));
        }
        let logits = &tape.activations[self.layers.len() - 1];
        if logits.rank() != 2 || logits.shape()[0] != labels.len() {
            return Err(Error::contract(format!("{} labels for a batch of {}", labels.len(), tape.batch_size())));
        }
        Ok(logits)
    }

    /// Gradients of the mean cross-entropy loss. Softmax and the loss are
    /// differentiated together: `dL/dz = (p - onehot) / N`.
    pub fn backward(&self, params: &Parameters, tape: &Tape, labels: &[usize]) -> Result<Parameters> {
        self.backward_scaled(params, tape, labels, labels.len())
    }

    /// As [`Network::backward`], for a slice of a minibatch of `total` samples.
    fn backward_scaled(&self, params: &Parameters, tape: &Tape, labels: &[usize], total: usize) -> Result<Parameters> {
        self.logits(tape, labels)?;
        let grad = self.output_gradient(tape, labels, total)?;
        Ok(self.backprop(params, tape, self.layers.len() - 1, grad, false)?.0)
    }

    /// Back-propagate `grad` (the gradient w.r.t. the output of layer
    /// `top - 1`, i.e. `activations[top]`) down to the input. Returns
    /// parameter gradients and the gradient w.r.t. the network input.
    pub fn backward_from(
        &self,
        params: &Parameters,
        tape: &Tape,
        top: usize,
        grad: Tensor,
    ) -> Result<(Parameters, Tensor)> {
        let (grads, input) = self.backprop(params, tape, top, grad, true)?;
        Ok((grads, input.expect("input gradient requested")))
    }

    fn backprop(
        &self,
        params: &Parameters,
        tape: &Tape,
        top: usize,
        grad: Tensor,
        need_input: bool,
    ) -> Result<(Parameters, Option<Tensor>)> {
        let mut grads = Parameters::from_blocks(vec![None; self.layers.len()]);
        let g = self.backprop_into(params, tape, top, grad, need_input, &mut grads)?;
        Ok((grads, g))
    }

    /// Back-propagate through layers `tape.start..top`, storing parameter
    /// gradients in (or adding them to) `grads`.
    fn backprop_into(
        &self,
        params: &Parameters,
        tape: &Tape,
        top: usize,
        grad: Tensor,
        need_input: bool,
        grads: &mut Parameters,
    ) -> Result<Option<Tensor>> {
        if tape.end() > self.layers.len() || top < tape.start || top > tape.end() {
            return Err(Error::contract("tape does not come from this network"));
        }
        let at_top = &tape.activations[top - tape.start];
        if grad.shape() != at_top.shape() {
            return Err(Error::contract(format!(
                "gradient {:?} does not match activation {:?}",
                grad.shape(),
                at_top.shape()
            )));
        }
        let mut g = grad;
        for i in (tape.start..top).rev() {
            let j = i - tape.start;
            let want = need_input || i > 0;
            let out = self.layers[i].backward(
                &tape.activations[j],
                &tape.activations[j + 1],
                &tape.aux[j],
                &g,
                params.get(i),
                want,
            )?;
            grads.accumulate(i, out.params)?;
            match out.input {
                Some(next) => g = next,
                None if !want => return Ok(None),
                None => return Err(Error::contract(format!("layer {i} returned no input gradient"))),
            }
        }
        Ok(Some(g))
    }

    /// Training-mode forward plus backward on one minibatch.
    pub fn loss_and_gradients(
        &self,
        params: &Parameters,
        x: &Tensor,
        labels: &[usize],
        seed: u64,
    ) -> Result<(f64, Parameters)> {
        self.loss_and_gradients_chunked(params, x, labels, seed, usize::MAX)
    }

    /// Same result as [`Network::loss_and_gradients`] up to summation order.
    ///
    /// The layers before the first flat-input layer (the convolutional trunk)
    /// run `chunk` samples at a time so their activations stay
    /// cache-resident; the trunk is run again during backward instead of
    /// keeping its activations. The remaining layers see the whole batch.
    pub fn loss_and_gradients_chunked(
        &self,
        params: &Parameters,
        x: &Tensor,
        labels: &[usize],
        seed: u64,
        chunk: usize,
    ) -> Result<(f64, Parameters)> {
        let n = self.check_input(x)?;
        params.check_against(self)?;
        if labels.len() != n {
            return Err(Error::contract(format!("{} labels for a batch of {n}", labels.len())));
        }
        let split = self.trunk_len();
        let chunk = chunk.clamp(1, n);
        if split == 0 || chunk == n {
            let tape = self.forward(params, x, true, seed)?;
            let loss = self.loss(&tape, labels)?;
            return Ok((loss, self.backward(params, &tape, labels)?));
        }
        let per: usize = self.spec.input.iter().product();
        let slice = |start: usize, m: usize| {
            Tensor::from_vec(&batched(m, &self.spec.input), x.data()[start * per..(start + m) * per].to_vec())
        };

        let feat_shape = self.layers[split].input_shape().to_vec();
        let feat_per: usize = feat_shape.iter().product();
        let mut features = Vec::with_capacity(n * feat_per);
        for start in (0..n).step_by(chunk) {
            let m = chunk.min(n - start);
            let mut a = slice(start, m)?;
            for i in 0..split {
                let ctx = ForwardCtx { training: true, seed, layer_index: i, sample_offset: start };
                a = self.layers[i].forward(&a, params.get(i), &ctx)?.0;
            }
            features.extend_from_slice(a.data());
        }
        let features = Tensor::from_vec(&batched(n, &feat_shape), features)?;

        let head = self.run(params, features, split..self.layers.len(), true, seed, 0)?;
        let logits = &head.activations[head.activations.len() - 2];
        let k = logits.shape()[1];
        let mut loss = 0.0;
        for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
            loss += softmax_cross_entropy(row, label)?.0;
        }
        let mut grads = Parameters::from_blocks(vec![None; self.layers.len()]);
        let top = self.layers.len() - 1;
        let g = self.output_gradient(&head, labels, n)?;
        let dfeat = self.backprop_into(params, &head, top, g, true, &mut grads)?.expect("input gradient requested");

        for start in (0..n).step_by(chunk) {
            let m = chunk.min(n - start);
            let tape = self.run(params, slice(start, m)?, 0..split, true, seed, start)?;
            let g = Tensor::from_vec(
                &batched(m, &feat_shape),
                dfeat.data()[start * feat_per..(start + m) * feat_per].to_vec(),
            )?;
            self.backprop_into(params, &tape, split, g, false, &mut grads)?;
        }
        Ok((loss / n as f64, grads))
    }

    /// Number of leading layers with multi-axis inputs; zero unless the
    /// network ends in softmax.
    fn trunk_len(&self) -> usize {
        if !self.ends_in_softmax() {
            return 0;
        }
        self.layers.iter().position(|l| l.input_shape().len() == 1).unwrap_or(0)
    }

    fn output_gradient(&self, tape: &Tape, labels: &[usize], total: usize) -> Result<Tensor> {
        let probs = tape.output();
        let k = probs.shape()[1];
        let mut grad = probs.clone();
        for (row, &label) in grad.data_mut().chunks_exact_mut(k).zip(labels) {
            if label >= k {
                return Err(Error::contract(format!("label {label} out of range for {k} classes")));
            }
            row[label] -= 1.0;
            for v in row.iter_mut() {
                *v /= total as f64;
            }
        }
        Ok(grad)
    }
}

pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    let k = *t.shape().last().unwrap_or(&1);
    t.data()
        .chunks_exact(k.max(1))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::spec::default_network;
    use crate::rng::{rng_normal, Rng};

    fn small() -> NetworkSpec {
        NetworkSpec {
            input: vec![9, 9, 1],
            layers: vec![
                LayerSpec::Conv { kernel: 3, filters: 3 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { window: 3, stride: 2 },
                LayerSpec::Lrn { k: 2.0, n: 3, alpha: 1e-2, beta: 0.75 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 5 },
                LayerSpec::Relu,
                LayerSpec::Dropout { keep: 0.5 },
                LayerSpec::Dense { units: 3 },
                LayerSpec::Softmax,
            ],
        }
    }

    #[test]
    fn default_shape_walk() {
        let net = Network::new(default_network(7).unwrap()).unwrap();
        let shapes: Vec<Vec<usize>> = net.layers().iter().map(|l| l.output_shape().to_vec()).collect();
        assert_eq!(shapes[0], [186, 186, 16]);
        assert_eq!(shapes[2], [92, 92, 16]);
        assert_eq!(shapes[4], [90, 90, 32]);
        assert_eq!(shapes[6], [44, 44, 32]);
        assert_eq!(shapes[8], [61_952]);
        assert_eq!(shapes[9], [128]);
        assert_eq!(shapes[11], [64]);
        assert_eq!(shapes.last().unwrap(), &[7]);
    }

    #[test]
    fn bad_spec_names_the_layer() {
        let mut spec = small();
        spec.input = vec![2, 2, 1];
        let err = Network::new(spec).unwrap_err().to_string();
        assert!(err.contains("layer 0"), "{err}");
    }

    #[test]
    fn inference_is_deterministic_and_matches_tape() {
        let net = Network::new(small()).unwrap();
        let params = Parameters::init(&net, &Rng::new(1)).unwrap();
        let x = rng_normal(&mut Rng::new(2), 0.0, 1.0, &[4, 9, 9, 1]).unwrap();
        let a = net.infer(&params, &x, 3).unwrap();
        let b = net.infer(&params, &x, 64).unwrap();
        assert_eq!(a, b);
        let tape = net.forward(&params, &x, false, 0).unwrap();
        assert_eq!(tape.output(), &a);
        for row in a.data().chunks_exact(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero_conv_weight_gradient() {
        let net = Network::new(small()).unwrap();
        let params = Parameters::init(&net, &Rng::new(3)).unwrap();
        let x = Tensor::zeros(&[2, 9, 9, 1]).unwrap();
        let (_, grads) = net.loss_and_gradients(&params, &x, &[0, 2], 5).unwrap();
        assert!(grads.get(0).unwrap().weight.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_gradient_is_probs_minus_onehot() {
        let net = Network::new(small()).unwrap();
        let params = Parameters::init(&net, &Rng::new(4)).unwrap();
        let x = rng_normal(&mut Rng::new(5), 0.0, 1.0, &[1, 9, 9, 1]).unwrap();
        let tape = net.forward(&params, &x, false, 0).unwrap();
        let grads = net.backward(&params, &tape, &[1]).unwrap();
        // the last dense bias gradient is dL/dz itself
        let p = tape.output().data();
        let db = grads.get(8).unwrap().bias.data();
        for j in 0..3 {
            let expect = p[j] - if j == 1 { 1.0 } else { 0.0 };
            assert!((db[j] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn chunking_matches_full_batch() {
        let net = Network::new(small()).unwrap();
        let params = Parameters::init(&net, &Rng::new(6)).unwrap();
        let x = rng_normal(&mut Rng::new(7), 0.0, 1.0, &[5, 9, 9, 1]).unwrap();
        let labels = [0, 1, 2, 1, 0];
        let (l1, g1) = net.loss_and_gradients(&params, &x, &labels, 11).unwrap();
        let (l2, g2) = net.loss_and_gradients_chunked(&params, &x, &labels, 11, 2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for ((_, a), (_, b)) in g1.trainable().zip(g2.trainable()) {
            assert!(a.weight.max_abs_diff(&b.weight) < 1e-12);
            assert!(a.bias.max_abs_diff(&b.bias) < 1e-12);
        }
    }

    #[test]
    fn rejects_foreign_tape() {
        let net = Network::new(small()).unwrap();
        let params = Parameters::init(&net, &Rng::new(4)).unwrap();
        let x = rng_normal(&mut Rng::new(5), 0.0, 1.0, &[2, 9, 9, 1]).unwrap();
        let tape = net.forward(&params, &x, false, 0).unwrap();
        assert!(net.backward(&params, &tape, &[1]).is_err());
        assert!(net.backward(&params, &tape, &[1, 3]).is_err());
    }
}
