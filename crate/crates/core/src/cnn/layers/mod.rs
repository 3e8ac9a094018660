//! Layer implementations behind the [`Layer`] trait, and the registry that
//! builds them from [`LayerSpec`]s.
//!
//! All layers work on batches: the leading tensor axis is the sample index,
//! the rest is the per-sample shape (`[h, w, c]` or `[d]`).

mod activation;
mod conv;
mod dense;
mod dropout;
mod flatten;
mod lrn;
mod pool;
mod softmax;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::params::ParamBlock;
use super::spec::LayerSpec;

pub use activation::{relu, Relu, Sigmoid};
pub use conv::{conv2d_forward, Conv2d};
pub use dense::{dense_forward, Dense};
pub use dropout::{dropout_forward, Dropout};
pub use flatten::Flatten;
pub use lrn::{lrn_forward, Lrn};
pub use pool::{maxpool_forward, MaxPool};
pub use softmax::{softmax_cross_entropy, softmax_rows, Softmax};

/// Per-call forward settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardCtx {
    pub training: bool,
    /// Seed for stochastic layers; combined with the layer index and the
    /// sample's position in the batch.
    pub seed: u64,
    pub layer_index: usize,
    /// Position of the batch's first sample in the enclosing minibatch.
    pub sample_offset: usize,
}

/// Whatever a layer must remember from forward for its backward pass.
#[derive(Debug, Clone, Default)]
pub enum Aux {
    #[default]
    None,
    /// Winning input offset (within the sample) of every pooled output.
    Argmax(Vec<u32>),
    /// Per-element multiplier applied in forward.
    Mask(Vec<f64>),
    /// LRN denominators before exponentiation.
    Scale(Vec<f64>),
}

#[derive(Debug)]
pub struct LayerGrads {
    pub input: Option<Tensor>,
    pub params: Option<ParamBlock>,
}

pub trait Layer: Send + Sync {
    fn kind(&self) -> &'static str;

    fn spec(&self) -> LayerSpec;

    /// Per-sample input shape.
    fn input_shape(&self) -> &[usize];

    /// Per-sample output shape.
    fn output_shape(&self) -> &[usize];

    /// `(weight shape, bias shape)` for trainable layers.
    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        None
    }

    /// Inputs feeding one output unit, for weight initialization.
    fn fan_in(&self) -> usize {
        0
    }

    fn forward(&self, x: &Tensor, params: Option<&ParamBlock>, ctx: &ForwardCtx) -> Result<(Tensor, Aux)>;

    /// Gradients given the forward input `x`, output `y`, and `dL/dy`.
    fn backward(
        &self,
        x: &Tensor,
        y: &Tensor,
        aux: &Aux,
        grad_y: &Tensor,
        params: Option<&ParamBlock>,
        need_input_grad: bool,
    ) -> Result<LayerGrads>;
}

/// Batch size of `x` after checking its trailing shape.
pub(crate) fn batch_of(x: &Tensor, sample: &[usize], what: &str) -> Result<usize> {
    let s = x.shape();
    if s.len() != sample.len() + 1 || &s[1..] != sample {
        return Err(Error::shape(format!("{what} expects [N, {sample:?}], got {s:?}")));
    }
    Ok(s[0])
}

pub(crate) fn batched(n: usize, sample: &[usize]) -> Vec<usize> {
    let mut shape = Vec::with_capacity(sample.len() + 1);
    shape.push(n);
    shape.extend_from_slice(sample);
    shape
}

pub(crate) fn require_params<'a>(params: Option<&'a ParamBlock>, what: &str) -> Result<&'a ParamBlock> {
    params.ok_or_else(|| Error::contract(format!("{what} layer called without parameters")))
}

type LayerBuilder = fn(&LayerSpec, &[usize]) -> Result<Box<dyn Layer>>;

/// Layer builders keyed by [`LayerSpec::kind`].
pub struct LayerRegistry {
    builders: BTreeMap<&'static str, LayerBuilder>,
}

impl LayerRegistry {
    pub fn empty() -> Self {
        LayerRegistry { builders: BTreeMap::new() }
    }

    pub fn register(&mut self, kind: &'static str, builder: LayerBuilder) {
        self.builders.insert(kind, builder);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, spec: &LayerSpec, input: &[usize]) -> Result<Box<dyn Layer>> {
        spec.validate()?;
        let builder = self
            .builders
            .get(spec.kind())
            .ok_or_else(|| Error::param(format!("no layer registered for `{}`", spec.kind())))?;
        builder(spec, input)
    }
}

impl Default for LayerRegistry {
    fn default() -> Self {
        let mut r = LayerRegistry::empty();
        r.register("conv", |s, i| Ok(Box::new(Conv2d::from_spec(s, i)?)));
        r.register("relu", |_, i| Ok(Box::new(Relu::new(i))));
        r.register("sigmoid", |_, i| Ok(Box::new(Sigmoid::new(i))));
        r.register("maxpool", |s, i| Ok(Box::new(MaxPool::from_spec(s, i)?)));
        r.register("lrn", |s, i| Ok(Box::new(Lrn::from_spec(s, i)?)));
        r.register("flatten", |_, i| Ok(Box::new(Flatten::new(i))));
        r.register("dense", |s, i| Ok(Box::new(Dense::from_spec(s, i)?)));
        r.register("dropout", |s, i| Ok(Box::new(Dropout::from_spec(s, i)?)));
        r.register("softmax", |_, i| Ok(Box::new(Softmax::new(i)?)));
        r
    }
}
