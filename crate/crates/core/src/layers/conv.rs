use super::registry::{Composition, Init, ParamSpec};
use super::{ModelConfig, EMBEDDING};
use crate::data::PAD_ID;
use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId};

/// Window vectors `c_t = x_{t-w} : … : x_{t+w}`, with `pad` standing in for
/// positions outside the sentence.
pub fn conv_context(
    g: &mut Graph<'_>,
    xs: &[NodeId],
    pad: NodeId,
    window: usize,
) -> Result<Vec<NodeId>> {
    let t_len = xs.len() as isize;
    let w = window as isize;
    (0..t_len)
        .map(|t| {
            let parts: Vec<NodeId> = (t - w..=t + w)
                .map(|s| {
                    if (0..t_len).contains(&s) {
                        xs[s as usize]
                    } else {
                        pad
                    }
                })
                .collect();
            g.concat(&parts)
        })
        .collect()
}

/// One convolutional layer: `h_t = tanh(W_c c_t)`.
pub fn conv_layer(
    g: &mut Graph<'_>,
    xs: &[NodeId],
    pad: NodeId,
    window: usize,
    weight: NodeId,
) -> Result<Vec<NodeId>> {
    conv_context(g, xs, pad, window)?
        .into_iter()
        .map(|c| {
            let z = g.matvec(weight, c)?;
            Ok(g.tanh(z))
        })
        .collect()
}

/// Window convolution, optionally stacked. The first layer pads with the
/// `<pad>` embedding row; deeper layers pad with their own trained vector.
#[derive(Debug, Clone, Copy)]
pub struct ConvNet {
    pub depth: usize,
}

fn layer_prefix(layer: usize) -> String {
    if layer == 0 {
        "conv".to_string()
    } else {
        format!("conv{}", layer + 1)
    }
}

impl Composition for ConvNet {
    fn name(&self) -> &'static str {
        match self.depth {
            1 => "cnn",
            2 => "deep-cnn",
            _ => "cnn-stack",
        }
    }

    fn output_dim(&self, cfg: &ModelConfig) -> usize {
        cfg.conv_output_dim
    }

    fn param_specs(&self, cfg: &ModelConfig) -> Vec<ParamSpec> {
        let width = 2 * cfg.conv_window + 1;
        let mut specs = Vec::new();
        for layer in 0..self.depth {
            let prefix = layer_prefix(layer);
            let input = if layer == 0 {
                cfg.embedding_dim
            } else {
                specs.push(ParamSpec::new(
                    format!("{prefix}.pad"),
                    vec![cfg.conv_output_dim],
                    Init::Uniform(0.05),
                ));
                cfg.conv_output_dim
            };
            specs.push(ParamSpec::new(
                format!("{prefix}.W_c"),
                vec![cfg.conv_output_dim, width * input],
                Init::Glorot,
            ));
        }
        specs
    }

    fn compose(&self, cfg: &ModelConfig, g: &mut Graph<'_>, inputs: &[NodeId]) -> Result<Vec<NodeId>> {
        if inputs.is_empty() {
            return Err(Error::Contract("convolution over an empty sentence".into()));
        }
        let e_id = g.param_id(EMBEDDING)?;
        let mut hs = inputs.to_vec();
        for layer in 0..self.depth {
            let prefix = layer_prefix(layer);
            let pad = if layer == 0 {
                g.row(e_id, PAD_ID)?
            } else {
                g.param_named(&format!("{prefix}.pad"))?
            };
            let w = g.param_named(&format!("{prefix}.W_c"))?;
            hs = conv_layer(g, &hs, pad, cfg.conv_window, w)?;
        }
        Ok(hs)
    }
}
