use std::collections::{BTreeMap, HashMap};

use super::{ParamId, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Element-wise operations exposed through [`Graph::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Tanh,
    Sigmoid,
    Add,
    Mul,
    Concat,
}

#[derive(Debug)]
enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug)]
enum Op {
    Constant,
    Variable,
    Param(ParamId),
    Row { param: ParamId, row: usize },
    MatVec(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Concat(Vec<NodeId>),
    Sum(NodeId),
    AddN(Vec<NodeId>),
    Scale(NodeId, f64),
    Softmax(NodeId),
    SoftmaxXent {
        logits: NodeId,
        gold: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// Operation record for one forward pass. Nodes are appended in evaluation
/// order, so the node list is always topologically sorted.
#[derive(Debug)]
pub struct Graph<'p> {
    params: Option<&'p ParamSet>,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax_values(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

impl<'p> Graph<'p> {
    /// A graph with no parameter store; only constants and variables.
    pub fn new() -> Self {
        Graph {
            params: None,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn with_params(params: &'p ParamSet) -> Self {
        Graph {
            params: Some(params),
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn params(&self) -> Result<&'p ParamSet> {
        self.params
            .ok_or_else(|| Error::Contract("graph has no parameter store".into()))
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            shape,
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        id
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        match &self.nodes[id.0].value {
            Value::Owned(v) => v,
            // param nodes only exist when a store is attached
            Value::Param(p) => self.params.expect("param store").tensor(*p).values(),
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Copy of a node's value as a standalone tensor.
    pub fn tensor(&self, id: NodeId) -> Tensor {
        Tensor::new(self.shape(id).to_vec(), self.value(id).to_vec()).expect("node shape")
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[0]
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Input that does not receive gradients.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_values(), Op::Constant, false)
    }

    /// Free input whose gradient is reported by [`Gradients::node`].
    pub fn variable(&mut self, t: Tensor) -> NodeId {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_values(), Op::Variable, true)
    }

    /// Node for a stored parameter. Repeated calls return the same node, so
    /// every use of the parameter fans out from one place.
    pub fn param(&mut self, id: ParamId) -> Result<NodeId> {
        if let Some(&n) = self.param_nodes.get(&id) {
            return Ok(n);
        }
        let params = self.params()?;
        if id.0 >= params.len() {
            return Err(Error::Contract(format!("unknown parameter id {}", id.0)));
        }
        let t = params.tensor(id);
        let node = NodeId(self.nodes.len());
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: Value::Param(id),
            op: Op::Param(id),
            needs_grad: t.requires_grad(),
        });
        self.param_nodes.insert(id, node);
        Ok(node)
    }

    pub fn param_id(&self, name: &str) -> Result<ParamId> {
        self.params()?
            .id(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name}")))
    }

    pub fn param_named(&mut self, name: &str) -> Result<NodeId> {
        let id = self.param_id(name)?;
        self.param(id)
    }

    /// Row lookup in a matrix parameter; gradients flow back to that row only.
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<NodeId> {
        let params = self.params()?;
        let t = params.tensor(id);
        if t.shape().len() != 2 {
            return Err(Error::shape("row", t.shape(), &[row]));
        }
        if row >= t.shape()[0] {
            return Err(Error::Vocabulary {
                id: row,
                size: t.shape()[0],
            });
        }
        let values = t.row(row).to_vec();
        let needs = t.requires_grad();
        Ok(self.push(vec![t.shape()[1]], values, Op::Row { param: id, row }, needs))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let ws = self.shape(w);
        let xs = self.shape(x);
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(Error::shape("matvec", ws, xs));
        }
        let (m, n) = (ws[0], ws[1]);
        let wv = self.value(w);
        let xv = self.value(x);
        let out: Vec<f64> = (0..m)
            .map(|i| {
                wv[i * n..(i + 1) * n]
                    .iter()
                    .zip(xv)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let needs = self.needs(w) || self.needs(x);
        Ok(self.push(vec![m], out, Op::MatVec(w, x), needs))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul(a, b), needs))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).iter().map(|v| v.tanh()).collect();
        let needs = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Tanh(a), needs)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).iter().map(|&v| sigmoid(v)).collect();
        let needs = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Sigmoid(a), needs)
    }

    /// Concatenation of vectors, preserving order.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of zero vectors".into()));
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::shape("concat", self.shape(p), &[]));
            }
            out.extend_from_slice(self.value(p));
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(vec![out.len()], out, Op::Concat(parts.to_vec()), needs))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).iter().sum();
        let needs = self.needs(a);
        self.push(vec![1], vec![s], Op::Sum(a), needs)
    }

    /// Sum of several same-shaped nodes, accumulated left to right.
    pub fn add_n(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("add_n of zero nodes".into()))?;
        let mut out = self.value(first).to_vec();
        for &p in &parts[1..] {
            self.same_shape("add_n", first, p)?;
            out.iter_mut().zip(self.value(p)).for_each(|(o, v)| *o += v);
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            self.shape(first).to_vec(),
            out,
            Op::AddN(parts.to_vec()),
            needs,
        ))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let out = self.value(a).iter().map(|v| v * factor).collect();
        let needs = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Scale(a, factor), needs)
    }

    pub fn softmax(&mut self, logits: NodeId) -> Result<NodeId> {
        if self.shape(logits).len() != 1 {
            return Err(Error::shape("softmax", self.shape(logits), &[]));
        }
        let out = softmax_values(self.value(logits));
        let needs = self.needs(logits);
        Ok(self.push(self.shape(logits).to_vec(), out, Op::Softmax(logits), needs))
    }

    /// Softmax followed by the negative log-probability of `gold`. Returns the
    /// probabilities and the scalar loss node.
    pub fn softmax_xent(&mut self, logits: NodeId, gold: usize) -> Result<(Tensor, NodeId)> {
        let shape = self.shape(logits);
        if shape.len() != 1 || shape[0] < 2 {
            return Err(Error::shape("softmax_xent", shape, &[2]));
        }
        let k = shape[0];
        if gold >= k {
            return Err(Error::Label { gold, classes: k });
        }
        let z = self.value(logits);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = -(z[gold] - max - log_total);
        let probs = softmax_values(z);
        let needs = self.needs(logits);
        let node = self.push(
            vec![1],
            vec![loss],
            Op::SoftmaxXent {
                logits,
                gold,
                probs: probs.clone(),
            },
            needs,
        );
        Ok((Tensor::vector(probs), node))
    }

    pub fn elementwise(&mut self, op: Elementwise, args: &[NodeId]) -> Result<NodeId> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Contract(format!(
                    "{op:?} takes {n} operands, got {}",
                    args.len()
                )))
            }
        };
        match op {
            Elementwise::Tanh => arity(1).map(|_| self.tanh(args[0])),
            Elementwise::Sigmoid => arity(1).map(|_| self.sigmoid(args[0])),
            Elementwise::Add => arity(2).and_then(|_| self.add(args[0], args[1])),
            Elementwise::Mul => arity(2).and_then(|_| self.mul(args[0], args[1])),
            Elementwise::Concat => self.concat(args),
        }
    }

    /// Reverse pass from a scalar node. Visits each recorded operation once,
    /// newest first, summing contributions over every path.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.shape(loss).iter().product::<usize>() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut out = Gradients::default();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.op {
                Op::Constant => {}
                Op::Variable => {
                    grads[i] = Some(g);
                }
                Op::Param(p) => {
                    accumulate(out.params.entry(*p).or_insert_with(|| vec![0.0; g.len()]), &g);
                }
                Op::Row { param, row } => {
                    accumulate(
                        out.rows
                            .entry((*param, *row))
                            .or_insert_with(|| vec![0.0; g.len()]),
                        &g,
                    );
                }
                Op::MatVec(w, x) => {
                    let n = self.shape(*w)[1];
                    if self.needs(*w) {
                        let xv = self.value(*x);
                        let dw = slot(&mut grads, *w, g.len() * n);
                        for (r, gi) in g.iter().enumerate() {
                            if *gi != 0.0 {
                                dw[r * n..(r + 1) * n]
                                    .iter_mut()
                                    .zip(xv)
                                    .for_each(|(d, xj)| *d += gi * xj);
                            }
                        }
                    }
                    if self.needs(*x) {
                        let wv = self.value(*w);
                        let dx = slot(&mut grads, *x, n);
                        for (r, gi) in g.iter().enumerate() {
                            if *gi != 0.0 {
                                dx.iter_mut()
                                    .zip(&wv[r * n..(r + 1) * n])
                                    .for_each(|(d, wij)| *d += gi * wij);
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for c in [*a, *b] {
                        if self.needs(c) {
                            accumulate(slot(&mut grads, c, g.len()), &g);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        let bv = self.value(*b);
                        let da = slot(&mut grads, *a, g.len());
                        for ((d, gi), bi) in da.iter_mut().zip(&g).zip(bv) {
                            *d += gi * bi;
                        }
                    }
                    if self.needs(*b) {
                        let av = self.value(*a);
                        let db = slot(&mut grads, *b, g.len());
                        for ((d, gi), ai) in db.iter_mut().zip(&g).zip(av) {
                            *d += gi * ai;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let y = self.value(NodeId(i));
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = self.value(NodeId(i));
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.shape(p)[0];
                        if self.needs(p) {
                            accumulate(slot(&mut grads, p, len), &g[offset..offset + len]);
                        }
                        offset += len;
                    }
                }
                Op::Sum(a) => {
                    let len = self.value(*a).len();
                    slot(&mut grads, *a, len).iter_mut().for_each(|d| *d += g[0]);
                }
                Op::AddN(parts) => {
                    for &p in parts {
                        if self.needs(p) {
                            accumulate(slot(&mut grads, p, g.len()), &g);
                        }
                    }
                }
                Op::Scale(a, factor) => {
                    let da = slot(&mut grads, *a, g.len());
                    for (d, gi) in da.iter_mut().zip(&g) {
                        *d += gi * factor;
                    }
                }
                Op::Softmax(a) => {
                    let y = self.value(NodeId(i));
                    let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    let da = slot(&mut grads, *a, g.len());
                    for ((d, gi), yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += yi * (gi - dot);
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    gold,
                    probs,
                } => {
                    let dz = slot(&mut grads, *logits, probs.len());
                    for (k, (d, p)) in dz.iter_mut().zip(probs).enumerate() {
                        let onehot = if k == *gold { 1.0 } else { 0.0 };
                        *d += g[0] * (p - onehot);
                    }
                }
            }
        }
        out.nodes = grads;
        Ok(out)
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

/// Result of one reverse pass.
#[derive(Debug, Default, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    params: BTreeMap<ParamId, Vec<f64>>,
    rows: BTreeMap<(ParamId, usize), Vec<f64>>,
}

impl Gradients {
    /// Gradient with respect to a variable node.
    pub fn node(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes.get(id.0).and_then(|g| g.as_deref())
    }

    /// Dense gradient of a parameter, combining whole-tensor uses and row
    /// lookups. `None` when the parameter was not reached.
    pub fn param(&self, params: &ParamSet, id: ParamId) -> Option<Vec<f64>> {
        let mut dense = self.params.get(&id).cloned();
        for (&(p, row), g) in self.rows.range((id, 0)..=(id, usize::MAX)) {
            debug_assert_eq!(p, id);
            let t = params.tensor(id);
            let d = dense.get_or_insert_with(|| vec![0.0; t.len()]);
            let cols = t.shape()[1];
            accumulate(&mut d[row * cols..(row + 1) * cols], g);
        }
        dense
    }

    /// Adds `scale * gradient` into the parameters' gradient slots in
    /// parameter-id order.
    pub fn accumulate_into(&self, params: &mut ParamSet, scale: f64) {
        for (&id, g) in &self.params {
            let slot = params.tensor_mut(id).grad_mut();
            slot.iter_mut().zip(g).for_each(|(d, s)| *d += scale * s);
        }
        for (&(id, row), g) in &self.rows {
            let t = params.tensor_mut(id);
            let cols = t.shape()[1];
            let slot = &mut t.grad_mut()[row * cols..(row + 1) * cols];
            slot.iter_mut().zip(g).for_each(|(d, s)| *d += scale * s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn matvec_identity_and_hand_product() {
        let mut g = Graph::new();
        let id = g.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = g.constant(Tensor::vector(vec![3.0, 4.0]));
        let y = g.matvec(id, x).unwrap();
        assert_eq!(g.value(y), &[3.0, 4.0]);

        let w = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let ones = g.constant(Tensor::vector(vec![1.0, 1.0]));
        let y = g.matvec(w, ones).unwrap();
        assert_eq!(g.value(y), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_zero_matrix_annihilates() {
        let mut g = Graph::new();
        let w = g.constant(Tensor::zeros(vec![3, 2]));
        let x = g.variable(Tensor::vector(vec![0.3, -1.2]));
        let y = g.matvec(w, x).unwrap();
        assert_eq!(g.value(y), &[0.0; 3]);
        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.node(x).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn matvec_backward_outer_and_transpose() {
        let mut g = Graph::new();
        let w = g.variable(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let x = g.variable(Tensor::vector(vec![1.0, -1.0, 2.0]));
        let y = g.matvec(w, x).unwrap();
        let c = g.constant(Tensor::vector(vec![2.0, -1.0]));
        let z = g.mul(y, c).unwrap();
        let s = g.sum(z);
        let grads = g.backward(s).unwrap();
        // dW = c ⊗ x, dx = Wᵀ c
        assert_eq!(
            grads.node(w).unwrap(),
            &[2.0, -2.0, 4.0, -1.0, 1.0, -2.0]
        );
        assert_eq!(grads.node(x).unwrap(), &[-2.0, -1.0, 0.0]);
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let w = g.constant(Tensor::zeros(vec![2, 3]));
        let x = g.constant(Tensor::zeros(vec![2]));
        let err = g.matvec(w, x).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2]"), "{msg}");
    }

    #[test]
    fn elementwise_symmetry_points_and_concat() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::scalar(0.0));
        let t = g.elementwise(Elementwise::Tanh, &[z]).unwrap();
        let s = g.elementwise(Elementwise::Sigmoid, &[z]).unwrap();
        assert_eq!(g.value(t), &[0.0]);
        assert_eq!(g.value(s), &[0.5]);

        let a = g.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = g.constant(Tensor::vector(vec![3.0]));
        let c = g.elementwise(Elementwise::Concat, &[a, b]).unwrap();
        assert_eq!(g.value(c), &[1.0, 2.0, 3.0]);
        assert!(g.elementwise(Elementwise::Add, &[a, b]).is_err());
        assert!(g.elementwise(Elementwise::Tanh, &[a, b]).is_err());
    }

    #[test]
    fn mul_product_rule() {
        let mut g = Graph::new();
        let a = g.variable(Tensor::vector(vec![2.0, 3.0]));
        let b = g.variable(Tensor::vector(vec![4.0, 5.0]));
        let m = g.mul(a, b).unwrap();
        assert_eq!(g.value(m), &[8.0, 15.0]);
        let s = g.sum(m);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.node(a).unwrap(), &[4.0, 5.0]);
        assert_eq!(grads.node(b).unwrap(), &[2.0, 3.0]);
    }

    #[test]
    fn softmax_xent_cases() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::vector(vec![0.0, 0.0]));
        let (p, l) = g.softmax_xent(z, 0).unwrap();
        assert_eq!(p.values(), &[0.5, 0.5]);
        assert!((g.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);

        let z = g.constant(Tensor::vector(vec![10.0, -10.0]));
        let (_, l) = g.softmax_xent(z, 0).unwrap();
        assert!(g.scalar(l) < 1e-8);

        // p1 = 1/(1+e^-1), loss = ln(1+e^-1)
        let z = g.variable(Tensor::vector(vec![1.0, 2.0]));
        let (p, l) = g.softmax_xent(z, 1).unwrap();
        let p1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!(close(p.values(), &[1.0 - p1, p1], 1e-15));
        assert!((p.values()[0] - 0.2689).abs() < 5e-5);
        assert!((g.scalar(l) - 0.3133).abs() < 5e-5);
        let grads = g.backward(l).unwrap();
        assert!(close(grads.node(z).unwrap(), &[1.0 - p1, p1 - 1.0], 1e-15));

        assert!(matches!(
            g.softmax_xent(z, 2),
            Err(Error::Label { gold: 2, classes: 2 })
        ));
    }

    #[test]
    fn backward_cases() {
        let mut g = Graph::new();
        let x = g.variable(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let s = g.sum(x);
        assert_eq!(g.backward(s).unwrap().node(x).unwrap(), &[1.0, 1.0, 1.0]);

        let mut g = Graph::new();
        let x = g.variable(Tensor::vector(vec![1.0, -2.0]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq);
        assert_eq!(g.backward(s).unwrap().node(x).unwrap(), &[2.0, -4.0]);

        let mut g = Graph::new();
        let x = g.variable(Tensor::vector(vec![5.0, 6.0, 7.0]));
        let s1 = g.sum(x);
        let s2 = g.sum(x);
        let s = g.add(s1, s2).unwrap();
        assert_eq!(g.backward(s).unwrap().node(x).unwrap(), &[2.0, 2.0, 2.0]);

        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn fan_out_matches_duplicated_parameter() {
        // shared parameter used twice vs two copies used once each
        let mut shared = ParamSet::new();
        let w = shared
            .insert("w", Tensor::matrix(2, 2, vec![0.3, -0.7, 1.1, 0.2]).unwrap())
            .unwrap();
        let mut dup = ParamSet::new();
        let w1 = dup.insert("w1", shared.tensor(w).clone()).unwrap();
        let w2 = dup.insert("w2", shared.tensor(w).clone()).unwrap();

        let x = Tensor::vector(vec![0.5, -1.5]);
        let run = |g: &mut Graph, a: NodeId, b: NodeId| {
            let x = g.constant(x.clone());
            let h = g.matvec(a, x).unwrap();
            let h = g.tanh(h);
            let y = g.matvec(b, h).unwrap();
            let y = g.sigmoid(y);
            g.sum(y)
        };

        let mut g = Graph::with_params(&shared);
        let p = g.param(w).unwrap();
        let l = run(&mut g, p, p);
        let gs = g.backward(l).unwrap().param(&shared, w).unwrap();

        let mut g = Graph::with_params(&dup);
        let a = g.param(w1).unwrap();
        let b = g.param(w2).unwrap();
        let l = run(&mut g, a, b);
        let grads = g.backward(l).unwrap();
        let g1 = grads.param(&dup, w1).unwrap();
        let g2 = grads.param(&dup, w2).unwrap();
        let summed: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        assert!(close(&gs, &summed, 1e-15));
    }

    #[test]
    fn row_lookup_accumulates_sparse_rows() {
        let mut ps = ParamSet::new();
        let e = ps
            .insert("E", Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap())
            .unwrap();
        let mut g = Graph::with_params(&ps);
        let r0 = g.row(e, 0).unwrap();
        let r0b = g.row(e, 0).unwrap();
        let r2 = g.row(e, 2).unwrap();
        assert_eq!(g.value(r0), g.value(r0b));
        let s = g.add_n(&[r0, r0b, r2]).unwrap();
        let s = g.sum(s);
        let grads = g.backward(s).unwrap();
        assert_eq!(
            grads.param(&ps, e).unwrap(),
            vec![2.0, 2.0, 0.0, 0.0, 1.0, 1.0]
        );
        assert!(matches!(g.row(e, 3), Err(Error::Vocabulary { id: 3, size: 3 })));

        let mut ps2 = ps.clone();
        grads.accumulate_into(&mut ps2, 0.5);
        assert_eq!(
            ps2.tensor(e).grad().unwrap(),
            &[1.0, 1.0, 0.0, 0.0, 0.5, 0.5]
        );
    }

    #[test]
    fn frozen_parameters_receive_nothing() {
        let mut ps = ParamSet::new();
        let e = ps.insert("E", Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap()).unwrap();
        ps.tensor_mut(e).set_requires_grad(false);
        let mut g = Graph::with_params(&ps);
        let r = g.row(e, 0).unwrap();
        let s = g.sum(r);
        assert!(g.backward(s).unwrap().param(&ps, e).is_none());
    }

    #[test]
    fn softmax_backward_matches_xent() {
        // d(-log softmax_k)/dz through the generic softmax path
        let mut g = Graph::new();
        let z = g.variable(Tensor::vector(vec![0.2, -0.4, 1.3]));
        let p = g.softmax(z).unwrap();
        let sel = g.constant(Tensor::vector(vec![0.0, 1.0, 0.0]));
        let pk = g.mul(p, sel).unwrap();
        let pk = g.sum(pk);
        let grads = g.backward(pk).unwrap();
        let pv = g.value(p).to_vec();
        let expected: Vec<f64> = (0..3)
            .map(|j| pv[1] * (if j == 1 { 1.0 } else { 0.0 } - pv[j]))
            .collect();
        assert!(close(grads.node(z).unwrap(), &expected, 1e-15));
    }
}
