use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cnn::container::{load_entries, parameters_from_entries, parameters_to_entries, save_entries, tags, Entry};
use crate::cnn::{default_network_with, Network, NetworkOptions, NetworkSpec, Parameters};
use crate::error::{Error, Result};
use crate::experiment::{evaluate_network, train, Dataset, RunRecord, TrainConfig};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::evaluate::{evaluate_predictions, ClassReport};
use super::features::{FeatureSet, Standardizer};
use super::mlp::{mlp_default_config, mlp_spec_with, mlp_train, MlpModel};
use super::svm::{svm_train, LinearModel};

/// An image classifier over segmented datasets.
pub trait Classifier: Send {
    fn name(&self) -> &'static str;
    /// `monitor` only feeds progress curves, never fitting decisions.
    fn fit(&mut self, train: &Dataset, monitor: &Dataset) -> Result<()>;
    fn predict(&self, data: &Dataset) -> Result<Vec<usize>>;
    fn save(&self, path: &Path) -> Result<()>;
    fn load(&mut self, path: &Path) -> Result<()>;
}

pub fn evaluate(model: &dyn Classifier, test: &Dataset) -> Result<ClassReport> {
    evaluate_predictions(&model.predict(test)?, test.labels(), test.classes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierOptions {
    pub cnn: TrainConfig,
    pub network: NetworkOptions,
    pub svm_epochs: usize,
    pub svm_lambda: f64,
    pub svm_seed: u64,
    pub bp: TrainConfig,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        ClassifierOptions {
            cnn: TrainConfig::default(),
            network: NetworkOptions::default(),
            svm_epochs: 50,
            svm_lambda: 1e-4,
            svm_seed: 0,
            bp: mlp_default_config(0),
        }
    }
}

pub type ClassifierBuilder = fn(&ClassifierOptions) -> Box<dyn Classifier>;

/// Classifier constructors by name.
pub struct ClassifierRegistry {
    builders: BTreeMap<&'static str, ClassifierBuilder>,
}

impl ClassifierRegistry {
    pub fn empty() -> Self {
        ClassifierRegistry { builders: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, builder: ClassifierBuilder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, name: &str, opts: &ClassifierOptions) -> Result<Box<dyn Classifier>> {
        let b = self.builders.get(name).ok_or_else(|| {
            Error::param(format!(
                "unknown classifier `{name}` (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        Ok(b(opts))
    }
}

impl Default for ClassifierRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("cnn", |o| Box::new(CnnClassifier::new(o.network.clone(), o.cnn.clone())));
        r.register("svm", |o| Box::new(SvmClassifier::new(o.svm_epochs, o.svm_lambda, o.svm_seed)));
        r.register("bp", |o| Box::new(BpClassifier::new(o.bp.clone())));
        r
    }
}

fn not_fitted(name: &str) -> Error {
    Error::contract(format!("{name} classifier is not fitted"))
}

fn standardizer_entry(s: &Standardizer) -> Result<Entry> {
    let d = s.mean.len();
    Ok(Entry {
        tag: tags::STANDARDIZER,
        tensors: vec![Tensor::from_vec(&[d], s.mean.clone())?, Tensor::from_vec(&[d], s.std.clone())?],
    })
}

fn standardizer_from(e: Option<&Entry>) -> Result<Standardizer> {
    match e {
        Some(e)
            if e.tag == tags::STANDARDIZER && e.tensors.len() == 2 && e.tensors[0].shape() == e.tensors[1].shape() =>
        {
            Ok(Standardizer { mean: e.tensors[0].data().to_vec(), std: e.tensors[1].data().to_vec() })
        }
        _ => Err(Error::Format("model file does not start with a standardizer entry".into())),
    }
}

/// Convolutional network trained with the experiment loop. Its `NetworkSpec` is
/// saved next to the parameters as `<path>.spec.json`.
pub struct CnnClassifier {
    options: NetworkOptions,
    config: TrainConfig,
    model: Option<(Network, Parameters)>,
    record: Option<RunRecord>,
}

impl CnnClassifier {
    pub fn new(options: NetworkOptions, config: TrainConfig) -> Self {
        CnnClassifier { options, config, model: None, record: None }
    }

    pub fn record(&self) -> Option<&RunRecord> {
        self.record.as_ref()
    }

    pub fn spec_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".spec.json");
        PathBuf::from(s)
    }
}

impl Classifier for CnnClassifier {
    fn name(&self) -> &'static str {
        "cnn"
    }

    fn fit(&mut self, train_set: &Dataset, monitor: &Dataset) -> Result<()> {
        let opts = NetworkOptions { input_side: train_set.side(), ..self.options.clone() };
        let spec = default_network_with(train_set.classes().len(), &opts)?;
        let out = train(&spec, train_set, monitor, &self.config)?;
        let net = Network::new(crate::experiment::effective_spec(&spec, &self.config))?;
        self.model = Some((net, out.params));
        self.record = Some(out.record);
        Ok(())
    }

    fn predict(&self, data: &Dataset) -> Result<Vec<usize>> {
        let (net, params) = self.model.as_ref().ok_or_else(|| not_fitted("cnn"))?;
        Ok(evaluate_network(net, params, data)?.predictions)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let (net, params) = self.model.as_ref().ok_or_else(|| not_fitted("cnn"))?;
        fs::write(Self::spec_path(path), net.spec().to_json()?)?;
        save_entries(path, &parameters_to_entries(net, params)?)
    }

    fn load(&mut self, path: &Path) -> Result<()> {
        let spec = NetworkSpec::from_json(&fs::read_to_string(Self::spec_path(path))?)?;
        let net = Network::new(spec)?;
        let params = parameters_from_entries(&net, &load_entries(path)?)?;
        self.model = Some((net, params));
        Ok(())
    }
}

/// Standardized hand-crafted features into a one-vs-rest linear SVM.
pub struct SvmClassifier {
    epochs: usize,
    lambda: f64,
    seed: u64,
    model: Option<(Standardizer, LinearModel)>,
}

impl SvmClassifier {
    pub fn new(epochs: usize, lambda: f64, seed: u64) -> Self {
        SvmClassifier { epochs, lambda, seed, model: None }
    }

    pub fn model(&self) -> Option<&LinearModel> {
        self.model.as_ref().map(|(_, m)| m)
    }
}

impl Classifier for SvmClassifier {
    fn name(&self) -> &'static str {
        "svm"
    }

    fn fit(&mut self, train_set: &Dataset, _monitor: &Dataset) -> Result<()> {
        let raw = FeatureSet::from_dataset(train_set)?;
        let std = Standardizer::fit(&raw)?;
        let model = svm_train(&std.apply(&raw)?, self.epochs, self.lambda, &Rng::new(self.seed))?;
        self.model = Some((std, model));
        Ok(())
    }

    fn predict(&self, data: &Dataset) -> Result<Vec<usize>> {
        let (std, model) = self.model.as_ref().ok_or_else(|| not_fitted("svm"))?;
        model.predict(&std.apply(&FeatureSet::from_dataset(data)?)?)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let (std, m) = self.model.as_ref().ok_or_else(|| not_fitted("svm"))?;
        let svm = Entry {
            tag: tags::LINEAR_SVM,
            tensors: vec![
                Tensor::from_vec(&[m.classes(), m.dim], m.weights.clone())?,
                Tensor::from_vec(&[m.classes()], m.bias.clone())?,
            ],
        };
        save_entries(path, &[standardizer_entry(std)?, svm])
    }

    fn load(&mut self, path: &Path) -> Result<()> {
        let entries = load_entries(path)?;
        let std = standardizer_from(entries.first())?;
        let model = match entries.get(1) {
            Some(e)
                if entries.len() == 2
                    && e.tag == tags::LINEAR_SVM
                    && e.tensors.len() == 2
                    && e.tensors[0].rank() == 2 =>
            {
                LinearModel::new(e.tensors[0].shape()[1], e.tensors[0].data().to_vec(), e.tensors[1].data().to_vec())
                    .map_err(|err| Error::Format(err.to_string()))?
            }
            _ => return Err(Error::Format("expected a single linear svm entry after the standardizer".into())),
        };
        if model.dim != std.mean.len() {
            return Err(Error::Format("svm and standardizer disagree on feature count".into()));
        }
        self.model = Some((std, model));
        Ok(())
    }
}

/// Standardized hand-crafted features into a sigmoid multilayer perceptron.
pub struct BpClassifier {
    config: TrainConfig,
    model: Option<(Standardizer, MlpModel)>,
}

impl BpClassifier {
    pub fn new(config: TrainConfig) -> Self {
        BpClassifier { config, model: None }
    }
}

impl Classifier for BpClassifier {
    fn name(&self) -> &'static str {
        "bp"
    }

    fn fit(&mut self, train_set: &Dataset, _monitor: &Dataset) -> Result<()> {
        let raw = FeatureSet::from_dataset(train_set)?;
        let std = Standardizer::fit(&raw)?;
        let model = mlp_train(&std.apply(&raw)?, &self.config)?;
        self.model = Some((std, model));
        Ok(())
    }

    fn predict(&self, data: &Dataset) -> Result<Vec<usize>> {
        let (std, model) = self.model.as_ref().ok_or_else(|| not_fitted("bp"))?;
        model.predict(&std.apply(&FeatureSet::from_dataset(data)?)?)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let (std, m) = self.model.as_ref().ok_or_else(|| not_fitted("bp"))?;
        let mut entries = vec![standardizer_entry(std)?];
        entries.extend(parameters_to_entries(&m.network, &m.params)?);
        save_entries(path, &entries)
    }

    fn load(&mut self, path: &Path) -> Result<()> {
        let entries = load_entries(path)?;
        let std = standardizer_from(entries.first())?;
        let dense = &entries[1..];
        let units: Vec<usize> = dense
            .iter()
            .map(|e| match e.tensors.first() {
                Some(w) if e.tag == tags::DENSE && w.rank() == 2 => Ok(w.shape()[1]),
                _ => Err(Error::Format("bp model entries must be dense layers".into())),
            })
            .collect::<Result<_>>()?;
        let (&classes, hidden) = units.split_last().ok_or_else(|| Error::Format("bp model has no layers".into()))?;
        let net =
            Network::new(mlp_spec_with(std.mean.len(), hidden, classes)).map_err(|e| Error::Format(e.to_string()))?;
        let params = parameters_from_entries(&net, dense)?;
        self.model = Some((std, MlpModel::new(net, params)?));
        Ok(())
    }
}
