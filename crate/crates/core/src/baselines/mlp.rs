use crate::cnn::{sgd_step, LayerSpec, Network, NetworkSpec, Parameters};
use crate::error::{Error, Result};
use crate::experiment::TrainConfig;
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::features::FeatureSet;

pub const HIDDEN: [usize; 2] = [64, 32];

/// `dim -> 64 -> 32 -> classes` with sigmoid hidden units and a softmax
/// output.
pub fn mlp_spec(dim: usize, classes: usize) -> NetworkSpec {
    mlp_spec_with(dim, &HIDDEN, classes)
}

pub fn mlp_spec_with(dim: usize, hidden: &[usize], classes: usize) -> NetworkSpec {
    let mut layers = Vec::new();
    for &units in hidden {
        layers.push(LayerSpec::Dense { units });
        layers.push(LayerSpec::Sigmoid);
    }
    layers.push(LayerSpec::Dense { units: classes });
    layers.push(LayerSpec::Softmax);
    NetworkSpec { input: vec![dim], layers }
}

#[derive(Debug)]
pub struct MlpModel {
    pub network: Network,
    pub params: Parameters,
}

impl MlpModel {
    pub fn new(network: Network, params: Parameters) -> Result<Self> {
        params.check_against(&network)?;
        if !params.is_finite() {
            return Err(Error::contract("mlp parameters must be finite"));
        }
        Ok(MlpModel { network, params })
    }

    pub fn predict(&self, set: &FeatureSet) -> Result<Vec<usize>> {
        let x = Tensor::from_vec(&[set.len(), set.dim], set.data.clone())?;
        self.network.predict(&self.params, &x)
    }
}

/// Minibatch SGD on the mean cross-entropy, walking a fresh permutation of
/// the samples each epoch. Uses `lr`, `max_iterations`, `batch_size`,
/// `seed` and `init_output_gain` from `cfg`.
pub fn mlp_train(set: &FeatureSet, cfg: &TrainConfig) -> Result<MlpModel> {
    mlp_train_with(set, &HIDDEN, cfg)
}

pub fn mlp_train_with(set: &FeatureSet, hidden: &[usize], cfg: &TrainConfig) -> Result<MlpModel> {
    cfg.validate()?;
    if set.distinct_labels() < 2 {
        return Err(Error::Training("mlp needs at least two classes present".into()));
    }
    let network = Network::new(mlp_spec_with(set.dim, hidden, set.classes))?;
    let rng = Rng::new(cfg.seed);
    let opts = crate::cnn::InitOptions { output_gain: cfg.init_output_gain };
    let mut params = Parameters::init_with(&network, &rng.child(0), &opts)?;
    let mut order_rng = rng.child(1);

    let n = set.len();
    let mut order = order_rng.permutation(n);
    let mut pos = 0;
    let mut indices = Vec::with_capacity(cfg.batch_size);
    let mut batch = Vec::with_capacity(cfg.batch_size * set.dim);
    for it in 1..=cfg.max_iterations {
        indices.clear();
        while indices.len() < cfg.batch_size {
            if pos == n {
                order = order_rng.permutation(n);
                pos = 0;
            }
            let take = (cfg.batch_size - indices.len()).min(n - pos);
            indices.extend_from_slice(&order[pos..pos + take]);
            pos += take;
        }
        batch.clear();
        indices.iter().for_each(|&i| batch.extend_from_slice(set.row(i)));
        let x = Tensor::from_vec(&[indices.len(), set.dim], batch.clone())?;
        let labels: Vec<usize> = indices.iter().map(|&i| set.labels[i]).collect();
        let (loss, grads) = network.loss_and_gradients(&params, &x, &labels, 0)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                context: format!("mlp loss at iteration {it}"),
                partial_curve: Vec::new(),
            });
        }
        sgd_step(&mut params, &grads, cfg.lr)?;
    }
    MlpModel::new(network, params)
}

/// Default BP settings for standardized features.
pub fn mlp_default_config(seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 0.5,
        max_iterations: 3000,
        batch_size: 32,
        dropout: false,
        seed,
        eval_interval: 1000,
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::gradcheck::check_layer;
    use crate::cnn::{ForwardCtx, LayerRegistry};

    fn xor(n: usize, seed: u64) -> FeatureSet {
        let mut rng = Rng::new(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let (a, b) = (rng.bernoulli(0.5), rng.bernoulli(0.5));
            data.push(if a { 1.0 } else { -1.0 } + rng.uniform(-0.3, 0.3));
            data.push(if b { 1.0 } else { -1.0 } + rng.uniform(-0.3, 0.3));
            labels.push((a ^ b) as usize);
        }
        FeatureSet::new(2, 2, data, labels).unwrap()
    }

    fn accuracy(p: &[usize], labels: &[usize]) -> f64 {
        p.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
    }

    #[test]
    fn learns_xor_which_a_linear_model_cannot() {
        let set = xor(200, 1);
        let cfg = TrainConfig { lr: 0.5, max_iterations: 2000, batch_size: 20, seed: 3, ..mlp_default_config(3) };
        let m = mlp_train(&set, &cfg).unwrap();
        assert!(accuracy(&m.predict(&set).unwrap(), &set.labels) >= 0.95);
        let svm = super::super::svm::svm_train(&set, 20, 1e-3, &Rng::new(0)).unwrap();
        assert!(accuracy(&svm.predict(&set).unwrap(), &set.labels) < 0.8);
    }

    #[test]
    fn sigmoid_gradient() {
        let layer = LayerRegistry::default().build(&LayerSpec::Sigmoid, &[5]).unwrap();
        let mut rng = Rng::new(8);
        let x = Tensor::from_vec(&[3, 5], (0..15).map(|_| rng.normal(0.0, 2.0)).collect()).unwrap();
        let ctx = ForwardCtx { training: true, seed: 0, layer_index: 0, sample_offset: 0 };
        assert!(check_layer(layer.as_ref(), &x, None, &ctx, &mut rng).unwrap().max_rel_error < 1e-4);
    }

    #[test]
    fn deterministic() {
        let set = xor(50, 2);
        let cfg = TrainConfig { max_iterations: 50, ..mlp_default_config(4) };
        let a = mlp_train(&set, &cfg).unwrap();
        let b = mlp_train(&set, &cfg).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn divergence_reported() {
        let set = xor(50, 2);
        let cfg = TrainConfig { lr: 1e300, max_iterations: 20, init_output_gain: 1e200, ..mlp_default_config(4) };
        assert!(matches!(mlp_train(&set, &cfg), Err(Error::Divergence { .. })));
    }
}
