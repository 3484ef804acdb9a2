use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use super::conv::ConvNet;
use super::recurrent::{BiRecurrent, CellKind};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId};

/// How a parameter is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `[-a, a]`.
    Uniform(f64),
    /// Uniform in `±sqrt(6 / (rows + cols))`.
    Glorot,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, init: Init) -> Self {
        ParamSpec {
            name: name.into(),
            shape,
            init,
        }
    }
}

/// A composition function: turns per-token embeddings into per-token
/// context vectors. Implementations declare their own parameters and look
/// them up by name on the graph.
pub trait Composition: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Size of each context vector handed to the output head.
    fn output_dim(&self, cfg: &ModelConfig) -> usize;

    fn param_specs(&self, cfg: &ModelConfig) -> Vec<ParamSpec>;

    fn compose(&self, cfg: &ModelConfig, g: &mut Graph<'_>, inputs: &[NodeId]) -> Result<Vec<NodeId>>;
}

/// Composition functions registered by name.
#[derive(Clone, Default)]
pub struct ArchitectureRegistry {
    entries: BTreeMap<String, Arc<dyn Composition>>,
}

impl fmt::Debug for ArchitectureRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl ArchitectureRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The six built-in architectures.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(ConvNet { depth: 1 }));
        r.register(Arc::new(ConvNet { depth: 2 }));
        r.register(Arc::new(BiRecurrent {
            cell: CellKind::Elman,
            depth: 1,
        }));
        r.register(Arc::new(BiRecurrent {
            cell: CellKind::Elman,
            depth: 2,
        }));
        r.register(Arc::new(BiRecurrent {
            cell: CellKind::Lstm,
            depth: 1,
        }));
        r.register(Arc::new(BiRecurrent {
            cell: CellKind::Lstm,
            depth: 2,
        }));
        r
    }

    /// Shared instance of [`ArchitectureRegistry::with_builtins`].
    pub fn builtin() -> &'static ArchitectureRegistry {
        static REGISTRY: OnceLock<ArchitectureRegistry> = OnceLock::new();
        REGISTRY.get_or_init(Self::with_builtins)
    }

    /// Registers a composition under its own name, replacing any previous
    /// entry with that name.
    pub fn register(&mut self, composition: Arc<dyn Composition>) {
        self.entries
            .insert(composition.name().to_string(), composition);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Composition>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown architecture {name:?}; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}
