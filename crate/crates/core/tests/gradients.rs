//! Analytic gradients of every architecture against central differences.

use gedtag::data::{build_vocab, words, LabeledSentence};
use gedtag::layers::{Activation, ArchitectureRegistry, Model, ModelConfig, Peephole};
use gedtag::tensor::{grad_check, Graph, NodeId};
use gedtag::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn vocab() -> gedtag::data::Vocabulary {
    build_vocab(&[LabeledSentence::clean(words("a b c d e f g"))], 1).unwrap()
}

fn config(arch: &str) -> ModelConfig {
    ModelConfig {
        architecture: arch.into(),
        embedding_dim: 3,
        conv_window: 1,
        conv_output_dim: 4,
        recurrent_dim: 3,
        pre_output_dim: 3,
        ..ModelConfig::default()
    }
}

/// Moves every parameter away from its structured initial value so zero
/// biases and unit forget biases do not hide mistakes.
fn perturbed(cfg: ModelConfig, seed: u64) -> Model {
    let mut model = Model::new(cfg, vocab(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for v in model.params_mut().tensor_mut(id).values_mut() {
            *v += rng.gen_range(-0.5..0.5);
        }
    }
    model
}

fn summed_xent(model: &Model, g: &mut Graph<'_>, ids: &[usize], labels: &[usize]) -> Result<NodeId> {
    let logits = model.logits(g, ids)?;
    let losses = logits
        .into_iter()
        .zip(labels)
        .map(|(z, &l)| g.softmax_xent(z, l).map(|(_, loss)| loss))
        .collect::<Result<Vec<_>>>()?;
    g.add_n(&losses)
}

fn check(cfg: ModelConfig, seed: u64) -> f64 {
    let arch = cfg.architecture.clone();
    let model = perturbed(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<usize> = (0..5).map(|_| rng.gen_range(0..model.vocab().len())).collect();
    let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..2)).collect();
    let mut params = model.params().clone();
    let report = grad_check(
        |g: &mut Graph<'_>| summed_xent(&model, g, &ids, &labels),
        &mut params,
        EPS,
        TOL,
    )
    .unwrap();
    assert!(
        report.passed(),
        "{arch}: max relative error {:e} at {:?}",
        report.max_rel_error,
        report.worst
    );
    report.max_rel_error
}

#[test]
fn every_architecture_passes_gradient_check() {
    for arch in ArchitectureRegistry::builtin().names() {
        for seed in [1, 2] {
            check(config(arch), seed);
        }
    }
}

#[test]
fn full_peepholes_and_tanh_elman_pass_gradient_check() {
    for arch in ["bi-lstm", "deep-bi-lstm"] {
        let cfg = ModelConfig {
            peephole: Peephole::Full,
            ..config(arch)
        };
        check(cfg, 3);
    }
    for arch in ["bi-rnn", "deep-bi-rnn"] {
        let cfg = ModelConfig {
            elman_activation: Activation::Tanh,
            ..config(arch)
        };
        check(cfg, 4);
    }
}

#[test]
fn wider_window_cnn_passes_gradient_check() {
    for arch in ["cnn", "deep-cnn"] {
        let cfg = ModelConfig {
            conv_window: 3,
            ..config(arch)
        };
        check(cfg, 5);
    }
}
