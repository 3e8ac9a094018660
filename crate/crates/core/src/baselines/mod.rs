//! Comparison methods on hand-crafted features: a one-vs-rest linear SVM and
//! a sigmoid multilayer perceptron, plus confusion-matrix evaluation and a
//! name-keyed registry covering these and the CNN.

mod classifier;
mod evaluate;
mod features;
mod mlp;
mod svm;

pub use classifier::{
    evaluate, BpClassifier, Classifier, ClassifierBuilder, ClassifierOptions, ClassifierRegistry, CnnClassifier,
    SvmClassifier,
};
pub use evaluate::{evaluate_predictions, ClassReport};
pub use features::{extract_features, FeatureSet, FeatureVector, Standardizer, FEATURE_DIM, GRID, HIST_BINS};
pub use mlp::{mlp_default_config, mlp_spec, mlp_spec_with, mlp_train, mlp_train_with, MlpModel, HIDDEN};
pub use svm::{svm_train, LinearModel};
