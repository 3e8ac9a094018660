use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::features::FeatureSet;

/// One-vs-rest linear scorer: `scores = W x + b`, `W` is `classes x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if dim == 0 || bias.len() < 2 || weights.len() != dim * bias.len() {
            return Err(Error::shape(format!(
                "linear model needs {} x {dim} weights for {} classes, got {}",
                bias.len(),
                bias.len(),
                weights.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::contract("linear model weights must be finite"));
        }
        Ok(LinearModel { dim, weights, bias })
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.dim)
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }

    pub fn predict_one(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }

    pub fn predict(&self, set: &FeatureSet) -> Result<Vec<usize>> {
        if set.dim != self.dim {
            return Err(Error::shape(format!("model expects {} features, got {}", self.dim, set.dim)));
        }
        Ok((0..set.len()).map(|i| self.predict_one(set.row(i))).collect())
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().chain(&self.bias).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// First index of the largest value.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Pegasos training of one binary hinge-loss classifier per class.
///
/// Identical samples are merged and drawn with probability proportional to
/// their multiplicity, so the objective and the sampled sequence depend only
/// on the empirical distribution. The bias is an extra weight on a constant
/// input and is regularized with the rest. Each class model runs
/// `epochs x distinct samples` steps on its own stream `rng.child(class)`;
/// the returned weights are the mean iterate over the second half of them.
pub fn svm_train(set: &FeatureSet, epochs: usize, lambda: f64, rng: &Rng) -> Result<LinearModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be positive, got {lambda}")));
    }
    if epochs == 0 {
        return Err(Error::param("epochs must be at least 1"));
    }
    if set.distinct_labels() < 2 {
        return Err(Error::Training("svm needs at least two classes present".into()));
    }

    let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut unique: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    for i in 0..set.len() {
        let key = (set.labels[i], set.row(i).iter().map(|v| v.to_bits()).collect());
        match index.get(&key) {
            Some(&u) => mult[u] += 1.0,
            None => {
                index.insert(key, unique.len());
                unique.push(i);
                mult.push(1.0);
            }
        }
    }
    let total: f64 = mult.iter().sum();
    let mut cumulative = Vec::with_capacity(mult.len());
    let mut acc = 0.0;
    for m in &mult {
        acc += m / total;
        cumulative.push(acc);
    }

    let d = set.dim;
    let steps = epochs * unique.len();
    let radius = 1.0 / lambda.sqrt();
    let mut weights = Vec::with_capacity(set.classes * d);
    let mut bias = Vec::with_capacity(set.classes);
    for class in 0..set.classes {
        let mut r = rng.child(class as u64);
        let mut w = vec![0.0; d + 1];
        let mut avg = vec![0.0; d + 1];
        let tail_start = steps / 2 + 1;
        for t in 1..=steps {
            let u = r.next_f64();
            let pick = cumulative.partition_point(|&c| c <= u).min(unique.len() - 1);
            let row = unique[pick];
            let x = set.row(row);
            let y = if set.labels[row] == class { 1.0 } else { -1.0 };
            let eta = 1.0 / (lambda * t as f64);
            let margin = y * (w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                w[..d].iter_mut().zip(x).for_each(|(v, xi)| *v += eta * y * xi);
                w[d] += eta * y;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                w.iter_mut().for_each(|v| *v *= radius / norm);
            }
            if t >= tail_start {
                let k = (t - tail_start + 1) as f64;
                avg.iter_mut().zip(&w).for_each(|(a, v)| *a += (v - *a) / k);
            }
        }
        bias.push(avg[d]);
        weights.extend_from_slice(&avg[..d]);
    }
    LinearModel::new(d, weights, bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn blobs(n: usize, seed: u64) -> FeatureSet {
        let mut rng = Rng::new(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { -2.0 } else { 2.0 };
            data.push(centre + rng.uniform(-0.8, 0.8));
            data.push(rng.uniform(-3.0, 3.0));
            labels.push(c);
        }
        FeatureSet::new(2, 2, data, labels).unwrap()
    }

    fn accuracy(m: &LinearModel, set: &FeatureSet) -> f64 {
        let p = m.predict(set).unwrap();
        p.iter().zip(&set.labels).filter(|(a, b)| a == b).count() as f64 / set.len() as f64
    }

    #[test]
    fn separable_blobs() {
        let set = blobs(100, 1);
        let m = svm_train(&set, 20, 1e-3, &Rng::new(2)).unwrap();
        assert_eq!(accuracy(&m, &set), 1.0);
    }

    #[test]
    fn huge_lambda_shrinks_weights() {
        let m = svm_train(&blobs(50, 3), 5, 1e6, &Rng::new(0)).unwrap();
        assert!(m.weight_norm() < 1e-2, "{}", m.weight_norm());
    }

    #[test]
    fn duplication_invariant() {
        let set = blobs(40, 5);
        let mut doubled = set.clone();
        doubled.data.extend_from_slice(&set.data);
        doubled.labels.extend_from_slice(&set.labels);
        let a = svm_train(&set, 3, 1e-2, &Rng::new(9)).unwrap();
        let b = svm_train(&doubled, 3, 1e-2, &Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_rejected() {
        let set = FeatureSet::new(1, 3, vec![0.0, 1.0], vec![2, 2]).unwrap();
        assert!(matches!(svm_train(&set, 1, 0.1, &Rng::new(0)), Err(Error::Training(_))));
    }

    proptest! {
        #[test]
        fn scaling_features_keeps_zero_bias_predictions(
            w in proptest::collection::vec(-5.0f64..5.0, 12),
            x in proptest::collection::vec(-5.0f64..5.0, 4),
            c in 0.01f64..100.0,
        ) {
            let m = LinearModel::new(4, w, vec![0.0; 3]).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let (s, t) = (m.scores(&x), m.scores(&scaled));
            for (a, b) in s.iter().zip(&t) {
                prop_assert!((a * c - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
            prop_assert_eq!(m.predict_one(&x), m.predict_one(&scaled));
        }
    }
}
