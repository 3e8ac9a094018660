use serde::Serialize;

use crate::error::Result;

use super::network::Network;
use super::spec::{LayerSpec, NetworkSpec};

/// Parameter and connection bookkeeping for one layer.
///
/// `params` counts every allocated weight and bias (`(k*k*Cin + 1) * F` for a
/// convolution). `params_per_map` is the per-feature-map convention
/// `(k*k + 1) * F`, which ignores input-channel fan-in, and `connections`
/// is `params_per_map` times the number of output positions. For dense
/// layers all three coincide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCount {
    pub index: usize,
    pub kind: &'static str,
    pub params: usize,
    pub params_per_map: usize,
    pub connections: usize,
    pub out_shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParameterCount {
    pub layers: Vec<LayerCount>,
    pub total_params: usize,
    pub total_connections: usize,
}

pub fn count_parameters(spec: &NetworkSpec) -> Result<ParameterCount> {
    let net = Network::new(spec.clone())?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    let mut input = spec.input.clone();
    for (index, (ls, layer)) in spec.layers.iter().zip(net.layers()).enumerate() {
        let out_shape = layer.output_shape().to_vec();
        let (params, params_per_map, connections) = match *ls {
            LayerSpec::Conv { kernel, filters } => {
                let cin = input[2];
                let per_map = (kernel * kernel + 1) * filters;
                ((kernel * kernel * cin + 1) * filters, per_map, per_map * out_shape[0] * out_shape[1])
            }
            LayerSpec::Dense { units } => {
                let p = (input[0] + 1) * units;
                (p, p, p)
            }
            _ => (0, 0, 0),
        };
        layers.push(LayerCount {
            index,
            kind: ls.kind(),
            params,
            params_per_map,
            connections,
            out_shape: out_shape.clone(),
        });
        input = out_shape;
    }
    Ok(ParameterCount {
        total_params: layers.iter().map(|l| l.params).sum(),
        total_connections: layers.iter().map(|l| l.connections).sum(),
        layers,
    })
}
