use serde::{Deserialize, Serialize};

use crate::cnn::{
    argmax_rows, sgd_step, softmax_cross_entropy, InitOptions, LayerSpec, Network, NetworkSpec, Parameters,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::config::{FitThresholds, TrainConfig};
use super::curve::CurvePoint;
use super::dataset::Dataset;
use super::diagnose::{diagnose_fit, stable_tail, Verdict};

/// Samples per inference pass during evaluation.
const EVAL_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub curve: Vec<CurvePoint>,
    pub verdict: Verdict,
    /// Test accuracy settled over the last three evaluations.
    pub stable_tail: bool,
    pub final_train_acc: f64,
    pub final_test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub params: Parameters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Mean cross-entropy.
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Inference-mode loss, accuracy and predictions of `params` on `data`.
pub fn evaluate_network(net: &Network, params: &Parameters, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::contract("cannot evaluate on an empty dataset"));
    }
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(data.len());
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let m = EVAL_CHUNK.min(data.len() - start);
        let probs = net.infer(params, &data.range(start, m)?, EVAL_CHUNK)?;
        let k = probs.shape()[1];
        for (row, &label) in probs.data().chunks_exact(k).zip(&data.labels()[start..start + m]) {
            let p = row.get(label).ok_or_else(|| Error::contract(format!("label {label} beyond {k} outputs")))?;
            loss -= p.max(f64::MIN_POSITIVE).ln();
        }
        predictions.extend(argmax_rows(&probs));
    }
    let correct = predictions.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
    Ok(Evaluation { loss: loss / data.len() as f64, accuracy: correct as f64 / data.len() as f64, predictions })
}

/// The `NetworkSpec` actually trained: dropout layers keep everything when
/// `cfg.dropout` is off.
pub fn effective_spec(spec: &NetworkSpec, cfg: &TrainConfig) -> NetworkSpec {
    let mut spec = spec.clone();
    if !cfg.dropout {
        for l in &mut spec.layers {
            if let LayerSpec::Dropout { keep } = l {
                *keep = 1.0;
            }
        }
    }
    spec
}

/// Iterations at which the curve is sampled: 0, every interval, and the last.
pub fn eval_schedule(cfg: &TrainConfig) -> Vec<usize> {
    let mut points: Vec<usize> = (0..cfg.max_iterations).step_by(cfg.eval_interval).collect();
    points.push(cfg.max_iterations);
    points
}

pub fn train(spec: &NetworkSpec, train: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(spec, train, test, cfg, &FitThresholds::default(), &mut |_| {})
}

/// Minibatch SGD on the mean cross-entropy. Minibatches walk through a
/// fresh permutation of the training set each epoch. `on_eval` sees every
/// curve point as it is recorded.
pub fn train_with(
    spec: &NetworkSpec,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    thresholds: &FitThresholds,
    on_eval: &mut dyn FnMut(&CurvePoint),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let schedule = eval_schedule(cfg);
    if schedule.len() < 3 {
        return Err(Error::param(format!(
            "{} iterations with evaluation every {} gives fewer than 3 curve points",
            cfg.max_iterations, cfg.eval_interval
        )));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Training("training and test sets must be non-empty".into()));
    }
    let side = train.side();
    if spec.input != [side, side, 1] || test.side() != side {
        return Err(Error::shape(format!("network input {:?} does not fit {side}x{side} images", spec.input)));
    }
    if spec.classes() != Some(train.classes().len()) || test.classes() != train.classes() {
        return Err(Error::shape(format!(
            "network has {:?} outputs for {} classes",
            spec.classes(),
            train.classes().len()
        )));
    }

    let net = Network::new(effective_spec(spec, cfg))?;
    let rng = Rng::new(cfg.seed);
    let mut params = Parameters::init_with(&net, &rng.child(0), &InitOptions { output_gain: cfg.init_output_gain })?;
    let mut order_rng = rng.child(1);
    let dropout_rng = rng.child(2);
    let chunk = if cfg.micro_batch == 0 { cfg.batch_size } else { cfg.micro_batch };

    let mut curve = Vec::with_capacity(schedule.len());
    let mut record_point = |it: usize, params: &Parameters, curve: &mut Vec<CurvePoint>| -> Result<()> {
        let tr = evaluate_network(&net, params, train)?;
        let te = evaluate_network(&net, params, test)?;
        let point = CurvePoint { iteration: it, loss: tr.loss, train_acc: tr.accuracy, test_acc: te.accuracy };
        log::info!("iteration {it}: loss {:.4}, train {:.3}, test {:.3}", point.loss, point.train_acc, point.test_acc);
        on_eval(&point);
        curve.push(point);
        if !point.loss.is_finite() {
            return Err(Error::Divergence {
                context: format!("evaluation loss at iteration {it}"),
                partial_curve: curve.clone(),
            });
        }
        Ok(())
    };
    record_point(0, &params, &mut curve)?;

    let n = train.len();
    let mut order = order_rng.permutation(n);
    let mut pos = 0;
    let mut next_eval = 1;
    let mut indices = Vec::with_capacity(cfg.batch_size);
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
        let x = train.batch(&indices)?;
        let labels: Vec<usize> = indices.iter().map(|&i| train.labels()[i]).collect();
        let seed = dropout_rng.child(it as u64).seed();
        let (loss, grads) = match net.loss_and_gradients_chunked(&params, &x, &labels, seed, chunk) {
            Ok(v) => v,
            Err(Error::Divergence { context, .. }) => {
                return Err(Error::Divergence {
                    context: format!("{context} at iteration {it}"),
                    partial_curve: curve,
                });
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::Divergence {
                context: format!("training loss at iteration {it}"),
                partial_curve: curve,
            });
        }
        if let Err(e) = sgd_step(&mut params, &grads, cfg.lr) {
            return Err(match e {
                Error::Divergence { context, .. } => {
                    Error::Divergence { context: format!("{context} at iteration {it}"), partial_curve: curve }
                }
                other => other,
            });
        }
        if it == schedule[next_eval] {
            record_point(it, &params, &mut curve)?;
            next_eval += 1;
            let reached = cfg.stop_at_test_acc.is_some_and(|t| curve.last().is_some_and(|p| p.test_acc >= t));
            if reached && curve.len() >= 3 {
                break;
            }
        }
    }

    let verdict = diagnose_fit(&curve, thresholds)?;
    let last = *curve.last().expect("curve has points");
    let record = RunRecord {
        config: cfg.clone(),
        stable_tail: stable_tail(&curve, thresholds),
        curve,
        verdict,
        final_train_acc: last.train_acc,
        final_test_acc: last.test_acc,
    };
    Ok(TrainOutcome { record, params })
}

/// Mean cross-entropy of the first `count` training samples at fresh
/// initialization, in inference mode.
pub fn initial_loss(spec: &NetworkSpec, data: &Dataset, cfg: &TrainConfig, count: usize) -> Result<f64> {
    let net = Network::new(effective_spec(spec, cfg))?;
    let params =
        Parameters::init_with(&net, &Rng::new(cfg.seed).child(0), &InitOptions { output_gain: cfg.init_output_gain })?;
    let m = count.min(data.len());
    let mut total = 0.0;
    for start in (0..m).step_by(EVAL_CHUNK) {
        let len = EVAL_CHUNK.min(m - start);
        let tape = net.forward(&params, &data.range(start, len)?, false, 0)?;
        let logits = tape.activation(net.layers().len() - 1).expect("logits");
        let k = logits.shape()[1];
        for (row, &label) in logits.data().chunks_exact(k).zip(&data.labels()[start..start + len]) {
            total += softmax_cross_entropy(row, label)?.0;
        }
    }
    Ok(total / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Raster;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            input: vec![8, 8, 1],
            layers: vec![
                LayerSpec::Conv { kernel: 3, filters: 2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { window: 2, stride: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 6 },
                LayerSpec::Relu,
                LayerSpec::Dropout { keep: 0.8 },
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ],
        }
    }

    /// Class 0 has a bright left half, class 1 a bright top half.
    fn halves(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let items: Vec<(usize, Raster)> = (0..n)
            .map(|i| {
                let label = i % 2;
                let data = (0..64)
                    .map(|p| {
                        let bright = if label == 0 { p % 8 < 4 } else { p / 8 < 4 };
                        let base = if bright { 200.0 } else { 60.0 };
                        (base + rng.normal(0.0, 20.0)).clamp(0.0, 255.0) as u8
                    })
                    .collect();
                (label, Raster::gray(8, 8, data).unwrap())
            })
            .collect();
        Dataset::from_rasters(vec!["left".into(), "top".into()], 8, &items).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig { lr: 0.1, max_iterations: 60, batch_size: 8, eval_interval: 20, seed: 3, ..TrainConfig::default() }
    }

    #[test]
    fn learns_and_repeats_exactly() {
        let (tr, te) = (halves(40, 1), halves(20, 2));
        let a = train(&tiny_spec(), &tr, &te, &cfg()).unwrap();
        let b = train(&tiny_spec(), &tr, &te, &cfg()).unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.params, b.params);
        assert_eq!(a.record.curve.iter().map(|p| p.iteration).collect::<Vec<_>>(), [0, 20, 40, 60]);
        assert!(a.record.final_test_acc >= 0.95, "{:?}", a.record.curve);
    }

    #[test]
    fn micro_batches_match_whole_batches() {
        let (tr, te) = (halves(24, 1), halves(8, 2));
        let whole = train(&tiny_spec(), &tr, &te, &cfg()).unwrap();
        let split = train(&tiny_spec(), &tr, &te, &TrainConfig { micro_batch: 3, ..cfg() }).unwrap();
        for (a, b) in whole.params.blocks().iter().flatten().zip(split.params.blocks().iter().flatten()) {
            assert!(a.weight.max_abs_diff(&b.weight) < 1e-9);
        }
    }

    #[test]
    fn stops_at_target_accuracy() {
        let (tr, te) = (halves(40, 1), halves(20, 2));
        let cfg = TrainConfig { max_iterations: 400, stop_at_test_acc: Some(0.9), ..cfg() };
        let out = train(&tiny_spec(), &tr, &te, &cfg).unwrap();
        let last = out.record.curve.last().unwrap();
        assert!(last.iteration < 400 && last.test_acc >= 0.9);
        assert!(out.record.curve.len() >= 3);
    }

    #[test]
    fn schedule_includes_last_iteration() {
        let c = TrainConfig { max_iterations: 50, eval_interval: 20, ..cfg() };
        assert_eq!(eval_schedule(&c), [0, 20, 40, 50]);
    }

    #[test]
    fn rejects_short_runs_and_wrong_inputs() {
        let (tr, te) = (halves(8, 1), halves(4, 2));
        let short = TrainConfig { max_iterations: 5, eval_interval: 10, ..cfg() };
        assert!(matches!(train(&tiny_spec(), &tr, &te, &short), Err(Error::Parameter(_))));
        let mut wide = tiny_spec();
        wide.input = vec![9, 9, 1];
        assert!(matches!(train(&wide, &tr, &te, &cfg()), Err(Error::Shape(_))));
    }

    #[test]
    fn divergence_keeps_partial_curve() {
        let (tr, te) = (halves(8, 1), halves(4, 2));
        let c = TrainConfig { lr: 1e300, eval_interval: 1, ..cfg() };
        match train(&tiny_spec(), &tr, &te, &c) {
            Err(Error::Divergence { partial_curve, .. }) => assert!(!partial_curve.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
