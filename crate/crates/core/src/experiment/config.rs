use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplier from the reference learning rates (tuned for the original
/// full-size setup) to this implementation's mean-loss, unit-range inputs.
pub const DESK_LR_SCALE: f64 = 150.0;

/// Reference learning rate of the best-performing reference run.
pub const REFERENCE_LR: f64 = 7e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_iterations: usize,
    pub batch_size: usize,
    /// When false, dropout layers pass activations through unchanged.
    pub dropout: bool,
    pub seed: u64,
    pub eval_interval: usize,
    /// Scale on the initial weights of the classifier layer.
    pub init_output_gain: f64,
    /// Samples per pass through the convolutional layers; 0 means the whole
    /// minibatch at once. Does not change results beyond summation order.
    pub micro_batch: usize,
    /// Stop at the first evaluation (from the third curve point on) whose
    /// test accuracy reaches this.
    pub stop_at_test_acc: Option<f64>,
}

impl Default for TrainConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        TrainConfig {
            lr: REFERENCE_LR * DESK_LR_SCALE,
            max_iterations: 2000,
            batch_size: 32,
            dropout: true,
            seed: 0,
            eval_interval: 100,
            init_output_gain: 1.0,
            micro_batch: 0,
            stop_at_test_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::param(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be at least 1"));
        }
        if self.eval_interval == 0 {
            return Err(Error::param("evaluation interval must be at least 1"));
        }
        if !(self.init_output_gain > 0.0) || !self.init_output_gain.is_finite() {
            return Err(Error::param(format!("init output gain must be positive, got {}", self.init_output_gain)));
        }
        if let Some(t) = self.stop_at_test_acc {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::param(format!("target test accuracy must be in (0, 1], got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub fraction: f64,
    /// Split each class separately. Without it the pooled sample list is
    /// split and classes may end up unevenly represented.
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { fraction: 0.9, stratified: true, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::param(format!("split fraction must be in (0, 1), got {}", self.fraction)));
        }
        Ok(())
    }
}

/// Thresholds for [`crate::experiment::diagnose_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitThresholds {
    /// Train minus test accuracy above which a run over-fits...
    pub overfit_gap: f64,
    /// ...provided training accuracy is above this.
    pub overfit_train: f64,
    /// Training accuracy below which a run under-fits.
    pub underfit_train: f64,
    /// Largest test-accuracy range over the last three evaluations that
    /// still counts as stable.
    pub stable_range: f64,
}

impl Default for FitThresholds {
    fn default() -> Self {
        FitThresholds { overfit_gap: 0.10, overfit_train: 0.95, underfit_train: 0.80, stable_range: 0.01 }
    }
}
