//! Convolutional network engine: layer kernels, network assembly, training
//! primitives and parameter storage.

pub mod container;
pub mod count;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod params;
pub mod spec;

pub use count::{count_parameters, LayerCount, ParameterCount};
pub use layers::{
    conv2d_forward, dense_forward, dropout_forward, lrn_forward, maxpool_forward, relu, softmax_cross_entropy,
    softmax_rows, ForwardCtx, Layer, LayerRegistry,
};
pub use network::{argmax_rows, Network, Tape};
pub use params::{sgd_step, InitOptions, ParamBlock, Parameters};
pub use spec::{default_network, default_network_with, LayerSpec, NetworkOptions, NetworkSpec};
