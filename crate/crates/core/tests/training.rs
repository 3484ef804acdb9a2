use gedtag::data::{build_vocab, words, LabeledSentence};
use gedtag::layers::{checkpoint, ArchitectureRegistry, Model, ModelConfig};
use gedtag::train::{adam_step, batch_gradient, history_csv, predict, train, AdamState, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(arch: &str) -> ModelConfig {
    ModelConfig {
        architecture: arch.into(),
        embedding_dim: 6,
        conv_window: 1,
        conv_output_dim: 6,
        recurrent_dim: 5,
        pre_output_dim: 4,
        ..ModelConfig::default()
    }
}

fn corpus() -> Vec<LabeledSentence> {
    [
        ("the cat sleep on the mat", "000100"),
        ("she go to school every day", "010000"),
        ("we has many friends", "0100"),
        ("a apple fell from the tree", "100000"),
        ("they were happy", "000"),
        ("he walk home", "010"),
    ]
    .iter()
    .map(|(t, l)| LabeledSentence::new(words(t), l.bytes().map(|b| b - b'0').collect()).unwrap())
    .collect()
}

fn random_batch(rng: &mut ChaCha8Rng, vocab: usize) -> Vec<(Vec<usize>, Vec<u8>)> {
    (0..4)
        .map(|_| {
            let n = rng.gen_range(2..7);
            let ids = (0..n).map(|_| rng.gen_range(0..vocab)).collect();
            let labels = (0..n).map(|_| rng.gen_range(0..2)).collect();
            (ids, labels)
        })
        .collect()
}

#[test]
fn one_small_adam_step_lowers_the_batch_loss() {
    let data = corpus();
    let vocab = build_vocab(&data, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for arch in ArchitectureRegistry::builtin().names() {
        for trial in 0..3 {
            let owned = random_batch(&mut rng, vocab.len());
            let batch: Vec<(&[usize], &[u8])> = owned.iter().map(|(i, l)| (&i[..], &l[..])).collect();
            let mut base = Model::new(small(arch), vocab.clone(), trial).unwrap();
            let before = batch_gradient(&mut base, &batch).unwrap();
            let mut lr = 1e-4;
            let mut decreased = false;
            for _ in 0..4 {
                let mut model = base.clone();
                let mut state = AdamState::new(model.params());
                let cfg = TrainConfig {
                    learning_rate: lr,
                    ..TrainConfig::default()
                };
                adam_step(model.params_mut(), &mut state, &cfg).unwrap();
                let after = batch_gradient(&mut model, &batch).unwrap();
                if after < before {
                    decreased = true;
                    break;
                }
                lr /= 2.0;
            }
            assert!(decreased, "{arch} trial {trial}: loss did not decrease");
        }
    }
}

#[test]
fn single_sentence_is_memorized() {
    let data = vec![corpus().remove(1)];
    let vocab = build_vocab(&data, 1).unwrap();
    let model = Model::new(small("bi-lstm"), vocab, 2).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.01,
        max_epochs: 200,
        ..TrainConfig::default()
    };
    let out = train(model, &data, &data, &cfg).unwrap();
    let last = out.history.last().unwrap();
    assert!(last.loss < 0.01, "final loss {}", last.loss);
    let pred = predict(&out.model, &data[0].tokens, 0.5).unwrap();
    assert_eq!(pred.labels, data[0].labels);
}

#[test]
fn seed_and_config_determine_the_trajectory() {
    let data = corpus();
    let vocab = build_vocab(&data, 1).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.01,
        batch_size: 2,
        max_epochs: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    for arch in ["cnn", "bi-rnn", "deep-bi-lstm"] {
        let run = || {
            let model = Model::new(small(arch), vocab.clone(), 4).unwrap();
            let out = train(model, &data[..4], &data[4..], &cfg).unwrap();
            (history_csv(&out.history), checkpoint::to_bytes(&out.model).unwrap())
        };
        assert_eq!(run(), run(), "{arch}");
    }
    let other = TrainConfig { seed: 10, ..cfg.clone() };
    let model = Model::new(small("cnn"), vocab.clone(), 4).unwrap();
    let a = train(model.clone(), &data[..4], &data[4..], &cfg).unwrap();
    let b = train(model, &data[..4], &data[4..], &other).unwrap();
    assert_ne!(history_csv(&a.history), history_csv(&b.history));
}

#[test]
fn gradients_do_not_depend_on_thread_count() {
    let data = corpus();
    let vocab = build_vocab(&data, 1).unwrap();
    let owned = random_batch(&mut ChaCha8Rng::seed_from_u64(8), vocab.len());
    let batch: Vec<(&[usize], &[u8])> = owned.iter().map(|(i, l)| (&i[..], &l[..])).collect();
    let grads = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let mut model = Model::new(small("bi-lstm"), vocab.clone(), 1).unwrap();
        let loss = pool.install(|| batch_gradient(&mut model, &batch)).unwrap();
        let g: Vec<Vec<f64>> = model
            .params()
            .iter()
            .map(|(_, _, t)| t.grad().map(<[f64]>::to_vec).unwrap_or_default())
            .collect();
        (loss.to_bits(), g)
    };
    assert_eq!(grads(1), grads(4));
}
