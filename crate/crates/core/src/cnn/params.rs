use crate::error::{Error, Result};
use crate::rng::{rng_normal, Rng};
use crate::tensor::Tensor;

use super::network::Network;

/// Weight and bias of one trainable layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl ParamBlock {
    pub fn zeros(weight: &[usize], bias: &[usize]) -> Result<Self> {
        Ok(ParamBlock { weight: Tensor::zeros(weight)?, bias: Tensor::zeros(bias)? })
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.is_finite()
    }

    fn same_shape(&self, other: &ParamBlock) -> bool {
        self.weight.shape() == other.weight.shape() && self.bias.shape() == other.bias.shape()
    }
}

/// Weight initialization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    /// Multiplier on the He standard deviation of the last trainable layer.
    pub output_gain: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions { output_gain: 1.0 }
    }
}

/// One slot per layer; `None` for layers without parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    blocks: Vec<Option<ParamBlock>>,
}

impl Parameters {
    pub fn from_blocks(blocks: Vec<Option<ParamBlock>>) -> Self {
        Parameters { blocks }
    }

    /// Zero tensors shaped for `net`.
    pub fn zeros(net: &Network) -> Result<Self> {
        let blocks = net
            .layers()
            .iter()
            .map(|l| l.param_shapes().map(|(w, b)| ParamBlock::zeros(&w, &b)).transpose())
            .collect::<Result<_>>()?;
        Ok(Parameters { blocks })
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases. Layer `i`
    /// draws from `rng.child(i)`.
    pub fn init(net: &Network, rng: &Rng) -> Result<Self> {
        Self::init_with(net, rng, &InitOptions::default())
    }

    pub fn init_with(net: &Network, rng: &Rng, opts: &InitOptions) -> Result<Self> {
        if !(opts.output_gain > 0.0) {
            return Err(Error::param(format!("output gain must be positive, got {}", opts.output_gain)));
        }
        let last = net.layers().iter().rposition(|l| l.param_shapes().is_some());
        let mut blocks = Vec::with_capacity(net.layers().len());
        for (i, layer) in net.layers().iter().enumerate() {
            let Some((w, b)) = layer.param_shapes() else {
                blocks.push(None);
                continue;
            };
            let mut std = (2.0 / layer.fan_in() as f64).sqrt();
            if Some(i) == last {
                std *= opts.output_gain;
            }
            let weight = rng_normal(&mut rng.child(i as u64), 0.0, std, &w)?;
            blocks.push(Some(ParamBlock { weight, bias: Tensor::zeros(&b)? }));
        }
        Ok(Parameters { blocks })
    }

    pub fn blocks(&self) -> &[Option<ParamBlock>] {
        &self.blocks
    }

    pub fn get(&self, layer: usize) -> Option<&ParamBlock> {
        self.blocks.get(layer).and_then(Option::as_ref)
    }

    pub fn get_mut(&mut self, layer: usize) -> Option<&mut ParamBlock> {
        self.blocks.get_mut(layer).and_then(Option::as_mut)
    }

    /// `(layer index, block)` for trainable layers.
    pub fn trainable(&self) -> impl Iterator<Item = (usize, &ParamBlock)> {
        self.blocks.iter().enumerate().filter_map(|(i, b)| b.as_ref().map(|b| (i, b)))
    }

    pub fn len(&self) -> usize {
        self.trainable().map(|(_, b)| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.trainable().all(|(_, b)| b.is_finite())
    }

    /// Store `block` in slot `layer`, or add it to what is there.
    pub(crate) fn accumulate(&mut self, layer: usize, block: Option<ParamBlock>) -> Result<()> {
        match (&mut self.blocks[layer], block) {
            (_, None) => {}
            (slot @ None, Some(b)) => *slot = Some(b),
            (Some(a), Some(b)) => {
                a.weight.axpy(1.0, &b.weight)?;
                a.bias.axpy(1.0, &b.bias)?;
            }
        }
        Ok(())
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Parameters) -> Result<()> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::shape("parameter slot counts differ"));
        }
        for (i, (a, b)) in self.blocks.iter_mut().zip(&other.blocks).enumerate() {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) if a.same_shape(b) => {
                    a.weight.axpy(1.0, &b.weight)?;
                    a.bias.axpy(1.0, &b.bias)?;
                }
                _ => return Err(Error::shape(format!("parameter slot {i} differs"))),
            }
        }
        Ok(())
    }

    /// Shapes agree slot by slot with `net`.
    pub fn check_against(&self, net: &Network) -> Result<()> {
        if self.blocks.len() != net.layers().len() {
            return Err(Error::shape(format!(
                "parameters have {} slots, network has {} layers",
                self.blocks.len(),
                net.layers().len()
            )));
        }
        for (i, (block, layer)) in self.blocks.iter().zip(net.layers()).enumerate() {
            let ok = match (block, layer.param_shapes()) {
                (None, None) => true,
                (Some(b), Some((w, bias))) => b.weight.shape() == w && b.bias.shape() == bias,
                _ => false,
            };
            if !ok {
                return Err(Error::shape(format!("parameters of layer {i} ({}) do not fit", layer.kind())));
            }
        }
        Ok(())
    }
}

/// `params -= lr * grads`. Nothing is modified unless every gradient is
/// finite and shaped like its parameter.
pub fn sgd_step(params: &mut Parameters, grads: &Parameters, lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::param(format!("learning rate must be positive and finite, got {lr}")));
    }
    if params.blocks.len() != grads.blocks.len() {
        return Err(Error::shape("gradient slots do not match parameter slots"));
    }
    for (i, (p, g)) in params.blocks.iter().zip(&grads.blocks).enumerate() {
        match (p, g) {
            (None, None) => {}
            (Some(p), Some(g)) if p.same_shape(g) => {
                if !g.is_finite() {
                    return Err(Error::Divergence {
                        context: format!("non-finite gradient in layer {i}"),
                        partial_curve: Vec::new(),
                    });
                }
            }
            _ => return Err(Error::shape(format!("gradient of layer {i} does not match its parameters"))),
        }
    }
    for (i, (p, g)) in params.blocks.iter_mut().zip(&grads.blocks).enumerate() {
        if let (Some(p), Some(g)) = (p, g) {
            p.weight.axpy(-lr, &g.weight)?;
            p.bias.axpy(-lr, &g.bias)?;
            if !p.is_finite() {
                return Err(Error::Divergence {
                    context: format!("non-finite parameters in layer {i}"),
                    partial_curve: Vec::new(),
                });
            }
        }
    }
    Ok(())
}
