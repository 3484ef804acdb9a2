//! End-to-end acceptance checks. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::fmt::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use gedtag::data::{
    align_correction, build_vocab, read_span_file, spans_to_labels, words, LabeledSentence,
};
use gedtag::eval::{f_beta, DetectionCounts};
use gedtag::layers::{checkpoint, ArchitectureRegistry, Model, ModelConfig};
use gedtag::synth::{default_templates, generate, labeled, long_range_task, SynthConfig};
use gedtag::tensor::{grad_check, Graph, NodeId};
use gedtag::train::{evaluate, history_csv, predict, train, write_history, TrainConfig, TrainOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("metric arithmetic on reported scores", metric_arithmetic),
        ("gradient checks, six architectures", gradient_checks),
        ("bi-lstm memorizes 10 synthetic sentences", overfit),
        ("synthetic benchmark and long-range probe", synthetic_benchmark),
        ("alignment matches exhaustive oracle", alignment_oracle),
        ("span conversion fixtures", span_fixtures),
        ("training determinism", determinism),
        ("checkpoint round trip", serialization),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!result.pass);
        println!(
            "[{}] {}. {} ({:.1}s): {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- metrics

/// (row, P, R, printed F0.5) for every reported detection score.
const REPORTED: &[(&str, f64, f64, f64)] = &[
    ("FCE dev CRF", 62.2, 13.6, 36.3),
    ("FCE dev CNN", 52.4, 24.9, 42.9),
    ("FCE dev Deep CNN", 48.4, 26.2, 41.4),
    ("FCE dev Bi-RNN", 63.9, 18.0, 42.3),
    ("FCE dev Deep Bi-RNN", 60.3, 17.6, 40.6),
    ("FCE dev Bi-LSTM", 54.5, 28.2, 46.0),
    ("FCE dev Deep Bi-LSTM", 56.7, 21.3, 42.5),
    ("FCE test CRF", 56.5, 8.2, 25.9),
    ("FCE test CNN", 46.0, 25.7, 39.8),
    ("FCE test Deep CNN", 41.4, 26.2, 37.1),
    ("FCE test Bi-RNN", 51.3, 19.0, 38.2),
    ("FCE test Deep Bi-RNN", 49.4, 19.9, 38.1),
    ("FCE test Bi-LSTM", 46.1, 28.5, 41.1),
    ("FCE test Deep Bi-LSTM", 48.2, 21.6, 38.6),
    ("CoNLL A2 Annotator 1", 60.2, 42.9, 55.7),
    ("CoNLL A1 Annotator 2", 42.9, 60.2, 45.5),
    ("CoNLL A1 CAMB", 33.7, 24.4, 31.3),
    ("CoNLL A2 CAMB", 48.5, 25.1, 40.8),
    ("CoNLL A1 CUUI", 34.8, 18.4, 29.5),
    ("CoNLL A2 CUUI", 47.7, 18.0, 35.9),
    ("CoNLL A1 AMU", 38.0, 16.0, 29.8),
    ("CoNLL A2 AMU", 51.0, 15.3, 34.8),
    ("CoNLL A1 P1+P2+S1+S2", 43.7, 13.0, 29.7),
    ("CoNLL A2 P1+P2+S1+S2", 60.3, 12.7, 34.5),
    ("CoNLL A1 Bi-LSTM (FCE-public)", 15.4, 22.8, 16.4),
    ("CoNLL A2 Bi-LSTM (FCE-public)", 23.6, 25.1, 23.9),
    ("CoNLL A1 Bi-LSTM (full)", 40.7, 21.0, 34.3),
    ("CoNLL A2 Bi-LSTM (full)", 59.2, 21.7, 44.0),
];

fn metric_arithmetic() -> Outcome {
    let tol = 0.05 + 1e-9;
    let mut misses = Vec::new();
    for &(row, p, r, printed) in REPORTED {
        let f = f_beta(p, r, 0.5);
        if (f - printed).abs() > tol {
            misses.push(format!("{row} {f:.2} vs {printed}"));
        }
    }
    // annotator 2 against annotator 1's 2992 errors, and the reverse
    let a = DetectionCounts::new(4199, 2992, 1800).unwrap();
    for (what, got, printed) in [("P 1800/4199", a.precision(), 42.9), ("R 1800/2992", a.recall(), 60.2)] {
        if (got - printed).abs() > tol {
            misses.push(format!("{what} {got:.2} vs {printed}"));
        }
    }
    let checked = REPORTED.len() + 2;
    if misses.is_empty() {
        outcome(true, format!("{checked}/{checked} values within 0.05"))
    } else {
        outcome(
            false,
            format!(
                "{}/{checked} outside 0.05 when recomputed from the rounded P and R: {}",
                misses.len(),
                misses.join("; ")
            ),
        )
    }
}

// -------------------------------------------------------------- gradients

fn summed_xent(model: &Model, g: &mut Graph<'_>, ids: &[usize], labels: &[usize]) -> gedtag::Result<NodeId> {
    let logits = model.logits(g, ids)?;
    let losses = logits
        .into_iter()
        .zip(labels)
        .map(|(z, &l)| g.softmax_xent(z, l).map(|(_, loss)| loss))
        .collect::<gedtag::Result<Vec<_>>>()?;
    g.add_n(&losses)
}

fn gradient_checks() -> Outcome {
    let vocab = build_vocab(&[LabeledSentence::clean(words("a b c d e f g h"))], 1).unwrap();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let names = ArchitectureRegistry::builtin().names();
    for (k, arch) in names.iter().enumerate() {
        let cfg = ModelConfig {
            architecture: arch.to_string(),
            embedding_dim: 4,
            conv_window: 1,
            conv_output_dim: 4,
            recurrent_dim: 3,
            pre_output_dim: 3,
            ..ModelConfig::default()
        };
        let mut model = Model::new(cfg, vocab.clone(), 40 + k as u64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let ids: Vec<_> = model.params().ids().collect();
        for id in ids {
            for v in model.params_mut().tensor_mut(id).values_mut() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
        let tokens: Vec<usize> = (0..5).map(|_| rng.gen_range(0..vocab.len())).collect();
        let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..2)).collect();
        let mut params = model.params().clone();
        let report = grad_check(
            |g: &mut Graph<'_>| summed_xent(&model, g, &tokens, &labels),
            &mut params,
            1e-5,
            1e-4,
        )
        .unwrap();
        worst = worst.max(report.max_rel_error);
        if !report.passed() {
            failures.push(format!("{arch} {:e}", report.max_rel_error));
        }
    }
    if failures.is_empty() {
        outcome(true, format!("max relative error {worst:.2e} < 1e-4 over {} architectures", names.len()))
    } else {
        outcome(false, failures.join(", "))
    }
}

// ---------------------------------------------------------------- overfit

fn overfit() -> Outcome {
    let corpus = labeled(&generate(&default_templates(), &SynthConfig::with_error_rate(0.15), 10, 5).unwrap());
    let errors: usize = corpus.iter().map(LabeledSentence::error_count).sum();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let cfg = ModelConfig {
        architecture: "bi-lstm".into(),
        embedding_dim: 16,
        recurrent_dim: 16,
        pre_output_dim: 16,
        ..ModelConfig::default()
    };
    let model = Model::new(cfg, vocab, 1).unwrap();
    let tc = TrainConfig {
        learning_rate: 0.01,
        batch_size: 10,
        max_epochs: 300,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(model, &corpus, &corpus, &tc).unwrap();
    let first = out.history.iter().find(|r| r.dev.f05() == 100.0).map(|r| r.epoch);
    let selected = evaluate(&out.model, &corpus, 0.5).unwrap().f05();
    match first {
        Some(epoch) if selected == 100.0 => outcome(
            true,
            format!("training F0.5 = 100 from epoch {epoch} ({errors} error tokens)"),
        ),
        _ => outcome(false, format!("selected model training F0.5 {selected:.1}")),
    }
}

// ------------------------------------------------------ synthetic training

struct Run {
    f05: f64,
    best_epoch: usize,
}

fn run(arch: &str, train_set: &[LabeledSentence], dev: &[LabeledSentence], pre_output: usize, tc: &TrainConfig) -> Run {
    let vocab = build_vocab(train_set, 2).unwrap();
    let cfg = ModelConfig {
        architecture: arch.into(),
        embedding_dim: 32,
        conv_window: 3,
        conv_output_dim: 32,
        recurrent_dim: 32,
        pre_output_dim: pre_output,
        ..ModelConfig::default()
    };
    let model = Model::new(cfg, vocab, 1).unwrap();
    let TrainOutcome {
        model,
        history,
        best_epoch,
    } = train(model, train_set, dev, tc).unwrap();
    let f05 = evaluate(&model, dev, tc.threshold).unwrap().f05();
    let best_epoch = best_epoch.unwrap();
    assert_eq!(f05, history[best_epoch - 1].dev_f05());
    Run { f05, best_epoch }
}

fn synthetic_benchmark() -> Outcome {
    let corpus = labeled(&generate(&default_templates(), &SynthConfig::with_error_rate(0.15), 10_000, 1).unwrap());
    let (train_set, dev) = corpus.split_at(9_000);
    let tc = TrainConfig {
        learning_rate: 0.005,
        batch_size: 32,
        max_epochs: 3,
        seed: 1,
        ..TrainConfig::default()
    };
    let lstm = run("bi-lstm", train_set, dev, 16, &tc);
    let cnn = run("cnn", train_set, dev, 16, &tc);

    let long: Vec<LabeledSentence> = long_range_task(5_000, 1).into_iter().map(|s| s.sentence).collect();
    let (long_train, long_dev) = long.split_at(4_500);
    let long_tc = TrainConfig {
        learning_rate: 0.01,
        batch_size: 16,
        max_epochs: 12,
        seed: 1,
        ..TrainConfig::default()
    };
    let long_lstm = run("bi-lstm", long_train, long_dev, 64, &long_tc);
    let long_cnn = run("cnn", long_train, long_dev, 64, &long_tc);

    let gap = long_lstm.f05 - long_cnn.f05;
    let pass = lstm.f05 >= 60.0 && cnn.f05 >= 50.0 && gap >= 15.0;
    let mut detail = String::new();
    write!(
        detail,
        "synth dev F0.5 bi-lstm {:.1} (>= 60, epoch {}), cnn d_w=3 {:.1} (>= 50, epoch {}); \
         long-range bi-lstm {:.1} vs cnn {:.1}, gap {:.1} (>= 15)",
        lstm.f05, lstm.best_epoch, cnn.f05, cnn.best_epoch, long_lstm.f05, long_cnn.f05, gap
    )
    .unwrap();
    outcome(pass, detail)
}

// -------------------------------------------------------------- alignment

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Op {
    Match,
    Sub,
    Del,
    Ins,
}

/// Every edit script, each listed from the end of both sequences backwards,
/// paired with the source index it touches (None for matches).
fn all_scripts(src: &[String], tgt: &[String], i: usize, j: usize, acc: &mut Vec<(Op, usize)>, out: &mut Vec<Vec<(Op, usize)>>) {
    if i == 0 && j == 0 {
        out.push(acc.clone());
        return;
    }
    if i > 0 && j > 0 {
        let op = if src[i - 1] == tgt[j - 1] { Op::Match } else { Op::Sub };
        acc.push((op, i - 1));
        all_scripts(src, tgt, i - 1, j - 1, acc, out);
        acc.pop();
    }
    if i > 0 {
        acc.push((Op::Del, i - 1));
        all_scripts(src, tgt, i - 1, j, acc, out);
        acc.pop();
    }
    if j > 0 {
        // inserted before source token i, which is the token that gets labelled
        acc.push((Op::Ins, i));
        all_scripts(src, tgt, i, j - 1, acc, out);
        acc.pop();
    }
}

fn touched(script: &[(Op, usize)], len: usize) -> Vec<u8> {
    let mut labels = vec![0u8; len];
    for &(op, i) in script {
        if op != Op::Match {
            labels[i.min(len - 1)] = 1;
        }
    }
    labels
}

/// Labels under the canonical minimum-cost script: scanning from the end,
/// the earliest step prefers match, then substitution, deletion, insertion.
fn oracle(src: &[String], tgt: &[String]) -> (Vec<u8>, Vec<u8>) {
    let mut scripts = Vec::new();
    all_scripts(src, tgt, src.len(), tgt.len(), &mut Vec::new(), &mut scripts);
    let cost = |s: &Vec<(Op, usize)>| s.iter().filter(|(op, _)| *op != Op::Match).count();
    let min = scripts.iter().map(cost).min().unwrap();
    let optimal: Vec<_> = scripts.into_iter().filter(|s| cost(s) == min).collect();
    let canonical = optimal
        .iter()
        .min_by(|a, b| a.iter().map(|x| x.0).cmp(b.iter().map(|x| x.0)))
        .unwrap();
    let mut any = vec![0u8; src.len()];
    for s in &optimal {
        for (a, t) in any.iter_mut().zip(touched(s, src.len())) {
            *a |= t;
        }
    }
    (touched(canonical, src.len()), any)
}

fn alignment_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let alphabet = ["a", "b", "c"];
    let mut sample = |min: usize| -> Vec<String> {
        let n = rng.gen_range(min..=6);
        (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string()).collect()
    };
    let pairs: Vec<(Vec<String>, Vec<String>)> = (0..1000).map(|_| (sample(1), sample(0))).collect();
    let mut mismatches = Vec::new();
    for (src, tgt) in &pairs {
        let got = align_correction(src, tgt).unwrap().labels;
        let (canonical, any) = oracle(src, tgt);
        let subset = got.iter().zip(&any).all(|(g, a)| g <= a);
        if got != canonical || !subset {
            mismatches.push(format!("{src:?} -> {tgt:?}: got {got:?}, oracle {canonical:?}"));
        }
    }
    if mismatches.is_empty() {
        outcome(true, format!("{}/{} pairs exact", pairs.len(), pairs.len()))
    } else {
        outcome(false, format!("{} mismatches, first {}", mismatches.len(), mismatches[0]))
    }
}

// ------------------------------------------------------------------ spans

fn span_fixtures() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let annotations = read_span_file(&dir.join("spans.txt")).unwrap();
    let expected: Vec<Vec<u8>> = std::fs::read_to_string(dir.join("spans.labels"))
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(annotations.len(), expected.len(), "fixture files out of step");
    let wrong: Vec<String> = annotations
        .iter()
        .zip(&expected)
        .filter_map(|(a, want)| {
            let got = spans_to_labels(a).unwrap().labels;
            (&got != want).then(|| format!("{:?} {:?}: got {got:?}", a.tokens, a.spans))
        })
        .collect();
    let n = annotations.len();
    if wrong.is_empty() {
        outcome(true, format!("{n}/{n} fixtures exact"))
    } else {
        outcome(false, format!("{}/{n} wrong: {}", wrong.len(), wrong.join("; ")))
    }
}

// ------------------------------------------------------------ determinism

fn determinism() -> Outcome {
    let corpus = labeled(&generate(&default_templates(), &SynthConfig::with_error_rate(0.15), 400, 9).unwrap());
    let (train_set, dev) = corpus.split_at(340);
    let tmp = tempfile::tempdir().unwrap();
    let tc = TrainConfig {
        learning_rate: 0.005,
        batch_size: 16,
        max_epochs: 3,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut files = Vec::new();
    for arch in ["bi-lstm", "deep-cnn"] {
        for attempt in 0..2 {
            let vocab = build_vocab(train_set, 2).unwrap();
            let cfg = ModelConfig {
                architecture: arch.into(),
                embedding_dim: 16,
                conv_output_dim: 16,
                recurrent_dim: 16,
                pre_output_dim: 8,
                ..ModelConfig::default()
            };
            let out = train(Model::new(cfg, vocab, 7).unwrap(), train_set, dev, &tc).unwrap();
            let history = tmp.path().join(format!("{arch}-{attempt}.csv"));
            let ckpt = tmp.path().join(format!("{arch}-{attempt}.ckpt"));
            write_history(&history, &out.history).unwrap();
            checkpoint::save_file(&out.model, &ckpt).unwrap();
            assert_eq!(std::fs::read_to_string(&history).unwrap(), history_csv(&out.history));
            files.push((arch, std::fs::read(history).unwrap(), std::fs::read(ckpt).unwrap()));
        }
    }
    let same = files.chunks(2).all(|p| p[0].1 == p[1].1 && p[0].2 == p[1].2);
    let bytes: usize = files.iter().step_by(2).map(|f| f.1.len() + f.2.len()).sum();
    outcome(
        same,
        if same {
            format!("history CSVs and checkpoints bitwise identical for bi-lstm and deep-cnn ({bytes} bytes)")
        } else {
            "repeated runs differ".to_string()
        },
    )
}

// ---------------------------------------------------------- serialization

fn serialization() -> Outcome {
    let corpus = labeled(&generate(&default_templates(), &SynthConfig::with_error_rate(0.15), 60, 4).unwrap());
    let vocab = build_vocab(&corpus, 1).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let names = ArchitectureRegistry::builtin().names();
    for arch in &names {
        let cfg = ModelConfig {
            architecture: arch.to_string(),
            embedding_dim: 8,
            conv_output_dim: 8,
            recurrent_dim: 6,
            pre_output_dim: 5,
            ..ModelConfig::default()
        };
        let model = Model::new(cfg, vocab.clone(), 11).unwrap();
        let path = tmp.path().join(format!("{arch}.ckpt"));
        checkpoint::save_file(&model, &path).unwrap();
        let loaded = checkpoint::load_file(&path).unwrap();
        let before = checkpoint::to_bytes(&model).unwrap();
        if checkpoint::to_bytes(&loaded).unwrap() != before || std::fs::read(&path).unwrap() != before {
            problems.push(format!("{arch}: bytes differ"));
        }
        let bits = |m: &Model| -> Vec<(String, Vec<u64>)> {
            m.params()
                .iter()
                .map(|(_, n, t)| (n.to_string(), t.values().iter().map(|v| v.to_bits()).collect()))
                .collect()
        };
        if bits(&model) != bits(&loaded) || model.config() != loaded.config() || model.vocab() != loaded.vocab() {
            problems.push(format!("{arch}: parameters, config or vocabulary differ"));
        }
        for s in &corpus {
            let a = predict(&model, &s.tokens, 0.5).unwrap();
            let b = predict(&loaded, &s.tokens, 0.5).unwrap();
            let same = a.labels == b.labels
                && a.probs_incorrect.iter().zip(&b.probs_incorrect).all(|(x, y)| x.to_bits() == y.to_bits());
            if !same {
                problems.push(format!("{arch}: predictions differ on {:?}", s.tokens));
                break;
            }
        }
    }
    if problems.is_empty() {
        outcome(
            true,
            format!("bit-exact for {} architectures; predictions identical on {} sentences", names.len(), corpus.len()),
        )
    } else {
        outcome(false, problems.join("; "))
    }
}
