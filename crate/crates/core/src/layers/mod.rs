//! The six composition architectures and the shared embedding/output head.
//!
//! Every model is `embed → composition → tanh pre-output layer → softmax`.
//! Compositions are looked up by name in an [`ArchitectureRegistry`], so new
//! variants can be plugged in without touching the model code.

pub mod checkpoint;
mod conv;
mod recurrent;
mod registry;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use conv::{conv_context, conv_layer, ConvNet};
pub use recurrent::{
    bidirectional, elman_step, lstm_step, BiRecurrent, CellKind, ElmanCell, LstmCell, Recurrence,
};
pub use registry::{ArchitectureRegistry, Composition, Init, ParamSpec};

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, ParamSet, Tensor};

pub const EMBEDDING: &str = "embed.E";
pub const HIDDEN_W: &str = "hidden.W";
pub const HIDDEN_B: &str = "hidden.b";
pub const OUTPUT_W: &str = "out.W";

/// Label index of the "incorrect" class.
pub const INCORRECT_LABEL: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Peephole {
    /// Element-wise peephole weights.
    Diagonal,
    /// Full matrices on the cell state.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: String,
    pub embedding_dim: usize,
    /// Tokens on either side of the target in convolutional layers.
    pub conv_window: usize,
    pub conv_output_dim: usize,
    /// Hidden size of each recurrent direction.
    pub recurrent_dim: usize,
    pub pre_output_dim: usize,
    pub num_labels: usize,
    pub vocab_size: usize,
    pub elman_activation: Activation,
    pub peephole: Peephole,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: "bi-lstm".into(),
            embedding_dim: 300,
            conv_window: 3,
            conv_output_dim: 300,
            recurrent_dim: 200,
            pre_output_dim: 50,
            num_labels: 2,
            vocab_size: 0,
            elman_activation: Activation::Sigmoid,
            peephole: Peephole::Diagonal,
        }
    }
}

impl ModelConfig {
    pub fn with_architecture(mut self, name: &str) -> Self {
        self.architecture = name.to_string();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embedding_dim", self.embedding_dim),
            ("conv_output_dim", self.conv_output_dim),
            ("recurrent_dim", self.recurrent_dim),
            ("pre_output_dim", self.pre_output_dim),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.num_labels < 2 {
            return Err(Error::Config("num_labels must be at least 2".into()));
        }
        Ok(())
    }
}

/// Architecture, vocabulary and named parameters.
#[derive(Clone)]
pub struct Model {
    config: ModelConfig,
    vocab: Vocabulary,
    params: ParamSet,
    composition: Arc<dyn Composition>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("vocab_size", &self.vocab.len())
            .field("parameters", &self.params.num_values())
            .finish()
    }
}

fn initial_values(spec: &ParamSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n: usize = spec.shape.iter().product();
    match spec.init {
        Init::Constant(c) => vec![c; n],
        Init::Uniform(a) => (0..n).map(|_| rng.gen_range(-a..=a)).collect(),
        Init::Glorot => {
            let (rows, cols) = match spec.shape.as_slice() {
                [r, c] => (*r, *c),
                [r] => (*r, 1),
                _ => (n, 1),
            };
            let a = (6.0 / (rows + cols) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-a..=a)).collect()
        }
    }
}

impl Model {
    /// Fresh model with seeded initialization, using the built-in
    /// architectures. `config.vocab_size` is set from `vocab`.
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        Self::with_registry(config, vocab, seed, ArchitectureRegistry::builtin())
    }

    pub fn with_registry(
        mut config: ModelConfig,
        vocab: Vocabulary,
        seed: u64,
        registry: &ArchitectureRegistry,
    ) -> Result<Self> {
        config.vocab_size = vocab.len();
        config.validate()?;
        let composition = registry.get(&config.architecture)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for spec in Self::specs_for(&config, composition.as_ref()) {
            let values = initial_values(&spec, &mut rng);
            params.insert(spec.name, Tensor::new(spec.shape, values)?)?;
        }
        Ok(Model {
            config,
            vocab,
            params,
            composition,
        })
    }

    /// Reassembles a model from stored parts, checking every parameter name
    /// and shape against the architecture's declaration.
    pub fn from_parts(config: ModelConfig, vocab: Vocabulary, params: ParamSet) -> Result<Self> {
        config.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(Error::Checkpoint(format!(
                "config vocab_size {} but vocabulary has {} entries",
                config.vocab_size,
                vocab.len()
            )));
        }
        let composition = ArchitectureRegistry::builtin().get(&config.architecture)?;
        let specs = Self::specs_for(&config, composition.as_ref());
        if specs.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                specs.len(),
                params.len()
            )));
        }
        for (spec, (_, name, t)) in specs.iter().zip(params.iter()) {
            if spec.name != name || spec.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} {:?} does not match expected {} {:?}",
                    t.shape(),
                    spec.name,
                    spec.shape
                )));
            }
        }
        Ok(Model {
            config,
            vocab,
            params,
            composition,
        })
    }

    fn specs_for(config: &ModelConfig, composition: &dyn Composition) -> Vec<ParamSpec> {
        let mut specs = vec![ParamSpec::new(
            EMBEDDING,
            vec![config.vocab_size, config.embedding_dim],
            Init::Uniform(0.05),
        )];
        specs.extend(composition.param_specs(config));
        let d = composition.output_dim(config);
        specs.push(ParamSpec::new(HIDDEN_W, vec![config.pre_output_dim, d], Init::Glorot));
        specs.push(ParamSpec::new(HIDDEN_B, vec![config.pre_output_dim], Init::Constant(0.0)));
        specs.push(ParamSpec::new(
            OUTPUT_W,
            vec![config.num_labels, config.pre_output_dim],
            Init::Glorot,
        ));
        specs
    }

    /// Declared parameters, in storage order.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        Self::specs_for(&self.config, self.composition.as_ref())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn composition(&self) -> &dyn Composition {
        self.composition.as_ref()
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        self.vocab.encode(tokens)
    }

    /// Per-token output logits recorded on `g`.
    pub fn logits(&self, g: &mut Graph<'_>, ids: &[usize]) -> Result<Vec<NodeId>> {
        if ids.is_empty() {
            return Err(Error::Contract("cannot label an empty sentence".into()));
        }
        let xs = embed(g, ids)?;
        let hs = self.composition.compose(&self.config, g, &xs)?;
        let hw = g.param_named(HIDDEN_W)?;
        let hb = g.param_named(HIDDEN_B)?;
        let ow = g.param_named(OUTPUT_W)?;
        hs.into_iter()
            .map(|h| {
                let z = g.matvec(hw, h)?;
                let z = g.add(z, hb)?;
                let z = g.tanh(z);
                g.matvec(ow, z)
            })
            .collect()
    }

    /// Label distributions, shape `[T, num_labels]`.
    pub fn forward(&self, ids: &[usize]) -> Result<Tensor> {
        let mut g = Graph::with_params(&self.params);
        let logits = self.logits(&mut g, ids)?;
        let mut values = Vec::with_capacity(ids.len() * self.config.num_labels);
        for z in logits {
            let p = g.softmax(z)?;
            values.extend_from_slice(g.value(p));
        }
        Tensor::new(vec![ids.len(), self.config.num_labels], values)
    }

    /// P(incorrect) for each token.
    pub fn prob_incorrect(&self, ids: &[usize]) -> Result<Vec<f64>> {
        let probs = self.forward(ids)?;
        Ok((0..ids.len())
            .map(|t| probs.row(t)[INCORRECT_LABEL])
            .collect())
    }

    /// Mean token cross-entropy for one sentence.
    pub fn sentence_loss(&self, g: &mut Graph<'_>, ids: &[usize], labels: &[u8]) -> Result<NodeId> {
        if ids.len() != labels.len() {
            return Err(Error::Contract(format!(
                "{} tokens but {} labels",
                ids.len(),
                labels.len()
            )));
        }
        let logits = self.logits(g, ids)?;
        let losses = logits
            .into_iter()
            .zip(labels)
            .map(|(z, &l)| g.softmax_xent(z, l as usize).map(|(_, loss)| loss))
            .collect::<Result<Vec<_>>>()?;
        let total = g.add_n(&losses)?;
        Ok(g.scale(total, 1.0 / ids.len() as f64))
    }
}

/// Embedding rows for each token id.
pub fn embed(g: &mut Graph<'_>, ids: &[usize]) -> Result<Vec<NodeId>> {
    let e = g.param_id(EMBEDDING)?;
    ids.iter().map(|&id| g.row(e, id)).collect()
}
