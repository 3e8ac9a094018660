use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid (unpadded) stride-1 convolution.
    Conv {
        kernel: usize,
        filters: usize,
    },
    Relu,
    Sigmoid,
    MaxPool {
        window: usize,
        stride: usize,
    },
    /// Across-channel local response normalization.
    Lrn {
        k: f64,
        n: usize,
        alpha: f64,
        beta: f64,
    },
    Flatten,
    Dense {
        units: usize,
    },
    /// Inverted dropout with keep probability `keep`.
    Dropout {
        keep: f64,
    },
    Softmax,
}

impl LayerSpec {
    /// Registry key.
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Relu => "relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Lrn { .. } => "lrn",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Conv { kernel, filters } if kernel == 0 || filters == 0 => {
                Err(Error::param("conv needs kernel >= 1 and filters >= 1"))
            }
            LayerSpec::MaxPool { window, stride } if stride == 0 || window < stride => {
                Err(Error::param(format!("maxpool needs window >= stride >= 1, got {window}/{stride}")))
            }
            LayerSpec::Lrn { k, n, alpha, beta } => {
                if n == 0 || n % 2 == 0 {
                    return Err(Error::param(format!("lrn span must be odd, got {n}")));
                }
                if !(k > 0.0) || !alpha.is_finite() || alpha < 0.0 || !beta.is_finite() || beta < 0.0 {
                    return Err(Error::param(format!("lrn needs k > 0, alpha >= 0, beta >= 0 (k={k})")));
                }
                Ok(())
            }
            LayerSpec::Dense { units: 0 } => Err(Error::param("dense needs units >= 1")),
            LayerSpec::Dropout { keep } if !(keep > 0.0 && keep <= 1.0) => {
                Err(Error::param(format!("dropout keep must be in (0, 1], got {keep}")))
            }
            _ => Ok(()),
        }
    }
}

/// Ordered layers plus the per-sample input shape (`[h, w, c]` for images,
/// `[d]` for feature vectors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn classes(&self) -> Option<usize> {
        let mut it = self.layers.iter().rev();
        match (it.next(), it.find(|l| matches!(l, LayerSpec::Dense { .. }))) {
            (Some(LayerSpec::Softmax), Some(LayerSpec::Dense { units })) => Some(*units),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Tunable parts of the default architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkOptions {
    pub input_side: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel: usize,
    pub pool_window: usize,
    pub pool_stride: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub dropout_keep: f64,
    /// Put LRN before pooling instead of after it.
    pub lrn_before_pool: bool,
    pub lrn_k: f64,
    pub lrn_n: usize,
    pub lrn_alpha: f64,
    pub lrn_beta: f64,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions {
            input_side: 188,
            conv1_filters: 16,
            conv2_filters: 32,
            kernel: 3,
            pool_window: 3,
            pool_stride: 2,
            dense1: 128,
            dense2: 64,
            dropout_keep: 0.5,
            lrn_before_pool: false,
            lrn_k: 2.0,
            lrn_n: 5,
            lrn_alpha: 1e-4,
            lrn_beta: 0.75,
        }
    }
}

pub fn default_network(classes: usize) -> Result<NetworkSpec> {
    default_network_with(classes, &NetworkOptions::default())
}

/// conv-relu-pool-lrn twice, then dense-relu, dense-relu, dropout and the
/// softmax classifier.
pub fn default_network_with(classes: usize, opts: &NetworkOptions) -> Result<NetworkSpec> {
    if classes < 2 {
        return Err(Error::param(format!("need at least 2 classes, got {classes}")));
    }
    let pool = LayerSpec::MaxPool { window: opts.pool_window, stride: opts.pool_stride };
    let lrn = LayerSpec::Lrn { k: opts.lrn_k, n: opts.lrn_n, alpha: opts.lrn_alpha, beta: opts.lrn_beta };
    let mut layers = Vec::new();
    for filters in [opts.conv1_filters, opts.conv2_filters] {
        layers.push(LayerSpec::Conv { kernel: opts.kernel, filters });
        layers.push(LayerSpec::Relu);
        if opts.lrn_before_pool {
            layers.push(lrn.clone());
            layers.push(pool.clone());
        } else {
            layers.push(pool.clone());
            layers.push(lrn.clone());
        }
    }
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense { units: opts.dense1 },
        LayerSpec::Relu,
        LayerSpec::Dense { units: opts.dense2 },
        LayerSpec::Relu,
        LayerSpec::Dropout { keep: opts.dropout_keep },
        LayerSpec::Dense { units: classes },
        LayerSpec::Softmax,
    ]);
    Ok(NetworkSpec { input: vec![opts.input_side, opts.input_side, 1], layers })
}
