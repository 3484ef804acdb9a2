//! Elman and peephole-LSTM cells, unrolled in both directions.

use super::registry::{Composition, Init, ParamSpec};
use super::{Activation, ModelConfig, Peephole};
use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, Tensor};

/// A left-to-right recurrence over a sequence of input vectors.
pub trait Recurrence {
    fn hidden_dim(&self) -> usize;

    /// Hidden states, one per input, in input order.
    fn run(&self, g: &mut Graph<'_>, xs: &[NodeId]) -> Result<Vec<NodeId>>;
}

/// Elman cell weights: `h_t = f(W x_t + V h_{t-1})`.
#[derive(Debug, Clone, Copy)]
pub struct ElmanCell {
    pub w: NodeId,
    pub v: NodeId,
    pub activation: Activation,
    pub hidden: usize,
}

pub fn elman_step(g: &mut Graph<'_>, x: NodeId, h_prev: NodeId, cell: &ElmanCell) -> Result<NodeId> {
    let wx = g.matvec(cell.w, x)?;
    let vh = g.matvec(cell.v, h_prev)?;
    let z = g.add(wx, vh)?;
    Ok(match cell.activation {
        Activation::Sigmoid => g.sigmoid(z),
        Activation::Tanh => g.tanh(z),
    })
}

impl Recurrence for ElmanCell {
    fn hidden_dim(&self) -> usize {
        self.hidden
    }

    fn run(&self, g: &mut Graph<'_>, xs: &[NodeId]) -> Result<Vec<NodeId>> {
        let mut h = g.constant(Tensor::zeros(vec![self.hidden]));
        xs.iter()
            .map(|&x| {
                h = elman_step(g, x, h, self)?;
                Ok(h)
            })
            .collect()
    }
}

/// Peephole LSTM weights for one direction.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_i: NodeId,
    pub u_i: NodeId,
    pub v_i: NodeId,
    pub b_i: NodeId,
    pub w_f: NodeId,
    pub u_f: NodeId,
    pub v_f: NodeId,
    pub b_f: NodeId,
    pub w_cand: NodeId,
    pub u_cand: NodeId,
    pub b_cand: NodeId,
    pub w_o: NodeId,
    pub u_o: NodeId,
    pub v_o: NodeId,
    pub b_o: NodeId,
    pub peephole: Peephole,
    pub hidden: usize,
}

fn peep(g: &mut Graph<'_>, kind: Peephole, v: NodeId, c: NodeId) -> Result<NodeId> {
    match kind {
        Peephole::Diagonal => g.mul(v, c),
        Peephole::Full => g.matvec(v, c),
    }
}

fn affine3(g: &mut Graph<'_>, terms: [NodeId; 3], bias: NodeId) -> Result<NodeId> {
    g.add_n(&[terms[0], terms[1], terms[2], bias])
}

/// One LSTM step. The input and forget gates peek at `c_{t-1}`, the output
/// gate at the new cell state `c_t`.
pub fn lstm_step(
    g: &mut Graph<'_>,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
    cell: &LstmCell,
) -> Result<(NodeId, NodeId)> {
    let p = cell.peephole;

    let wx = g.matvec(cell.w_i, x)?;
    let uh = g.matvec(cell.u_i, h_prev)?;
    let vc = peep(g, p, cell.v_i, c_prev)?;
    let z = affine3(g, [wx, uh, vc], cell.b_i)?;
    let input_gate = g.sigmoid(z);

    let wx = g.matvec(cell.w_f, x)?;
    let uh = g.matvec(cell.u_f, h_prev)?;
    let vc = peep(g, p, cell.v_f, c_prev)?;
    let z = affine3(g, [wx, uh, vc], cell.b_f)?;
    let forget_gate = g.sigmoid(z);

    let wx = g.matvec(cell.w_cand, x)?;
    let uh = g.matvec(cell.u_cand, h_prev)?;
    let z = g.add_n(&[wx, uh, cell.b_cand])?;
    let candidate = g.tanh(z);

    let keep = g.mul(forget_gate, c_prev)?;
    let write = g.mul(input_gate, candidate)?;
    let c = g.add(keep, write)?;

    let wx = g.matvec(cell.w_o, x)?;
    let uh = g.matvec(cell.u_o, h_prev)?;
    let vc = peep(g, p, cell.v_o, c)?;
    let z = affine3(g, [wx, uh, vc], cell.b_o)?;
    let output_gate = g.sigmoid(z);

    let squashed = g.tanh(c);
    let h = g.mul(output_gate, squashed)?;
    Ok((h, c))
}

impl Recurrence for LstmCell {
    fn hidden_dim(&self) -> usize {
        self.hidden
    }

    fn run(&self, g: &mut Graph<'_>, xs: &[NodeId]) -> Result<Vec<NodeId>> {
        let mut h = g.constant(Tensor::zeros(vec![self.hidden]));
        let mut c = g.constant(Tensor::zeros(vec![self.hidden]));
        xs.iter()
            .map(|&x| {
                (h, c) = lstm_step(g, x, h, c, self)?;
                Ok(h)
            })
            .collect()
    }
}

/// `h_t = h_t^→ : h_t^←`, each direction with its own weights.
pub fn bidirectional<F, B>(g: &mut Graph<'_>, forward: &F, backward: &B, xs: &[NodeId]) -> Result<Vec<NodeId>>
where
    F: Recurrence + ?Sized,
    B: Recurrence + ?Sized,
{
    if xs.is_empty() {
        return Err(Error::Contract("recurrence over an empty sentence".into()));
    }
    let fwd = forward.run(g, xs)?;
    let reversed: Vec<NodeId> = xs.iter().rev().copied().collect();
    let mut bwd = backward.run(g, &reversed)?;
    bwd.reverse();
    fwd.into_iter()
        .zip(bwd)
        .map(|(f, b)| g.concat(&[f, b]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Elman,
    Lstm,
}

/// Stacked bidirectional recurrent layers.
#[derive(Debug, Clone, Copy)]
pub struct BiRecurrent {
    pub cell: CellKind,
    pub depth: usize,
}

impl BiRecurrent {
    fn prefix(&self, layer: usize, dir: &str) -> String {
        let base = match self.cell {
            CellKind::Elman => "rnn",
            CellKind::Lstm => "lstm",
        };
        if layer == 0 {
            format!("{base}.{dir}")
        } else {
            format!("{base}{}.{dir}", layer + 1)
        }
    }

    fn input_dim(cfg: &ModelConfig, layer: usize) -> usize {
        if layer == 0 {
            cfg.embedding_dim
        } else {
            2 * cfg.recurrent_dim
        }
    }

    fn elman(g: &mut Graph<'_>, p: &str, cfg: &ModelConfig) -> Result<ElmanCell> {
        Ok(ElmanCell {
            w: g.param_named(&format!("{p}.W"))?,
            v: g.param_named(&format!("{p}.V"))?,
            activation: cfg.elman_activation,
            hidden: cfg.recurrent_dim,
        })
    }

    fn lstm(g: &mut Graph<'_>, p: &str, cfg: &ModelConfig) -> Result<LstmCell> {
        let mut get = |n: &str| g.param_named(&format!("{p}.{n}"));
        Ok(LstmCell {
            w_i: get("W_i")?,
            u_i: get("U_i")?,
            v_i: get("V_i")?,
            b_i: get("b_i")?,
            w_f: get("W_f")?,
            u_f: get("U_f")?,
            v_f: get("V_f")?,
            b_f: get("b_f")?,
            w_cand: get("W_cand")?,
            u_cand: get("U_cand")?,
            b_cand: get("b_cand")?,
            w_o: get("W_o")?,
            u_o: get("U_o")?,
            v_o: get("V_o")?,
            b_o: get("b_o")?,
            peephole: cfg.peephole,
            hidden: cfg.recurrent_dim,
        })
    }
}

impl Composition for BiRecurrent {
    fn name(&self) -> &'static str {
        match (self.cell, self.depth) {
            (CellKind::Elman, 1) => "bi-rnn",
            (CellKind::Elman, 2) => "deep-bi-rnn",
            (CellKind::Lstm, 1) => "bi-lstm",
            (CellKind::Lstm, 2) => "deep-bi-lstm",
            (CellKind::Elman, _) => "bi-rnn-stack",
            (CellKind::Lstm, _) => "bi-lstm-stack",
        }
    }

    fn output_dim(&self, cfg: &ModelConfig) -> usize {
        2 * cfg.recurrent_dim
    }

    fn param_specs(&self, cfg: &ModelConfig) -> Vec<ParamSpec> {
        let r = cfg.recurrent_dim;
        let mut specs = Vec::new();
        for layer in 0..self.depth {
            let d = Self::input_dim(cfg, layer);
            for dir in ["fwd", "bwd"] {
                let p = self.prefix(layer, dir);
                match self.cell {
                    CellKind::Elman => {
                        specs.push(ParamSpec::new(format!("{p}.W"), vec![r, d], Init::Glorot));
                        specs.push(ParamSpec::new(format!("{p}.V"), vec![r, r], Init::Glorot));
                    }
                    CellKind::Lstm => {
                        let peep_spec = |name: &str| match cfg.peephole {
                            Peephole::Diagonal => {
                                ParamSpec::new(format!("{p}.{name}"), vec![r], Init::Uniform(0.1))
                            }
                            Peephole::Full => {
                                ParamSpec::new(format!("{p}.{name}"), vec![r, r], Init::Glorot)
                            }
                        };
                        for gate in ["i", "f"] {
                            specs.push(ParamSpec::new(format!("{p}.W_{gate}"), vec![r, d], Init::Glorot));
                            specs.push(ParamSpec::new(format!("{p}.U_{gate}"), vec![r, r], Init::Glorot));
                            specs.push(peep_spec(&format!("V_{gate}")));
                            let bias = if gate == "f" { 1.0 } else { 0.0 };
                            specs.push(ParamSpec::new(format!("{p}.b_{gate}"), vec![r], Init::Constant(bias)));
                        }
                        specs.push(ParamSpec::new(format!("{p}.W_cand"), vec![r, d], Init::Glorot));
                        specs.push(ParamSpec::new(format!("{p}.U_cand"), vec![r, r], Init::Glorot));
                        specs.push(ParamSpec::new(format!("{p}.b_cand"), vec![r], Init::Constant(0.0)));
                        specs.push(ParamSpec::new(format!("{p}.W_o"), vec![r, d], Init::Glorot));
                        specs.push(ParamSpec::new(format!("{p}.U_o"), vec![r, r], Init::Glorot));
                        specs.push(peep_spec("V_o"));
                        specs.push(ParamSpec::new(format!("{p}.b_o"), vec![r], Init::Constant(0.0)));
                    }
                }
            }
        }
        specs
    }

    fn compose(&self, cfg: &ModelConfig, g: &mut Graph<'_>, inputs: &[NodeId]) -> Result<Vec<NodeId>> {
        let mut hs = inputs.to_vec();
        for layer in 0..self.depth {
            let (fp, bp) = (self.prefix(layer, "fwd"), self.prefix(layer, "bwd"));
            hs = match self.cell {
                CellKind::Elman => {
                    let f = Self::elman(g, &fp, cfg)?;
                    let b = Self::elman(g, &bp, cfg)?;
                    bidirectional(g, &f, &b, &hs)?
                }
                CellKind::Lstm => {
                    let f = Self::lstm(g, &fp, cfg)?;
                    let b = Self::lstm(g, &bp, cfg)?;
                    bidirectional(g, &f, &b, &hs)?
                }
            };
        }
        Ok(hs)
    }
}
