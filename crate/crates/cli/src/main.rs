use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gedtag::data::{
    align_correction, build_vocab, format_tsv, load_pretrained, read_span_file, read_token_lines, read_tsv,
    spans_to_labels, tokenize, LabeledSentence, Vocabulary,
};
use gedtag::eval::{detection_eval, format_csv, format_table, ReportRow};
use gedtag::layers::{checkpoint, Activation, Model, ModelConfig, Peephole, EMBEDDING};
use gedtag::scoring::{default_split, extract_features, fit_and_correlate, read_essays, scores_csv};
use gedtag::synth::{default_templates, generate, labeled, long_range_task, ErrorKind, ErrorRule, SynthConfig};
use gedtag::train::{evaluate, history_csv, overlap_count, predict, train, TrainConfig};
use gedtag_cli::service::{self, ServeConfig};

/// Neural token-level grammatical error detection.
#[derive(Debug, Parser)]
#[command(name = "gedtag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert span annotations (`tokens<TAB>start-end ...`) to a labeled TSV corpus.
    Convert {
        #[arg(long)]
        spans: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label source tokens changed by a correction (line-aligned token files).
    Align {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        corrected: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a vocabulary from labeled corpora.
    Vocab {
        #[arg(long = "corpus", required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long, default_value_t = 2)]
        min_count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model, keeping the epoch with the best development F0.5.
    Train(TrainArgs),
    /// Token-level P, R and F0.5 against a gold corpus.
    Eval(EvalArgs),
    /// Per-token P(incorrect) and labels.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// One whitespace-tokenized sentence per line.
        #[arg(long, conflicts_with = "text", required_unless_present = "text")]
        input: Option<PathBuf>,
        /// Raw text, tokenized on whitespace and outer punctuation.
        #[arg(long)]
        text: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Essay-level correctness feature and its correlation with gold scores.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// `essay_id<TAB>gold_score` lines.
        #[arg(long)]
        essays: PathBuf,
        /// Directory holding `<essay_id>.txt`, one tokenized sentence per line.
        #[arg(long)]
        dir: PathBuf,
        /// Number of leading essays used to fit the scorer (default: first 80%).
        #[arg(long)]
        split: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic learner-error corpus.
    Synth {
        #[arg(long, default_value_t = 1000)]
        sentences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Total corruption rate shared equally by the four rules.
        #[arg(long, default_value_t = 0.15, conflicts_with = "rules")]
        error_rate: f64,
        /// Individual rule as `kind=rate`, e.g. `swap_agreement=0.05`.
        #[arg(long = "rule", value_parser = parse_rule)]
        rules: Vec<ErrorRule>,
        /// Subject-verb agreement across a long prepositional chain instead.
        #[arg(long)]
        long_range: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve POST /predict over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training corpus; repeat to concatenate several.
    #[arg(long = "train", required = true)]
    corpora: Vec<PathBuf>,
    #[arg(long)]
    dev: PathBuf,
    /// Train one model per growing prefix of the --train list and report each.
    #[arg(long)]
    incremental: bool,
    /// Extra corpus scored with each stage's selected model.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    history: Option<PathBuf>,
    /// Training options as TOML; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model options as TOML; flags below override it.
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Fixed vocabulary file (one token per line) instead of building one.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    /// Plain-text embeddings used to initialize matching rows.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    conv_window: Option<usize>,
    #[arg(long)]
    conv_output_dim: Option<usize>,
    #[arg(long)]
    recurrent_dim: Option<usize>,
    #[arg(long)]
    pre_output_dim: Option<usize>,
    #[arg(long, value_parser = ["diagonal", "full"])]
    peephole: Option<String>,
    #[arg(long, value_parser = ["sigmoid", "tanh"])]
    elman_activation: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    freeze_embeddings: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    /// System output as labeled TSV; repeat to compare several systems.
    #[arg(long = "system", required_unless_present = "source", conflicts_with = "source")]
    systems: Vec<PathBuf>,
    /// Original sentences for correction output, one per line.
    #[arg(long, requires = "corrected")]
    source: Option<PathBuf>,
    /// Corrected sentences, line-aligned with --source.
    #[arg(long, requires = "source")]
    corrected: Option<PathBuf>,
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    max_length: Option<usize>,
}

/// Misuse that the argument parser cannot catch.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn parse_rule(s: &str) -> Result<ErrorRule, String> {
    let (kind, rate) = s.split_once('=').ok_or("expected kind=rate")?;
    let kind: ErrorKind = serde_json::from_value(serde_json::Value::String(kind.to_string())).map_err(|_| {
        format!("unknown rule kind {kind:?} (delete_function_word, swap_agreement, substitute_confusable, insert_spurious)")
    })?;
    let rate: f64 = rate.parse().map_err(|_| format!("bad rate {rate:?}"))?;
    Ok(ErrorRule { kind, rate })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<gedtag::Error>() {
            return if e.is_data_error() { 2 } else { 3 };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert { spans, out } => {
            let sentences = read_span_file(&spans)
                .with_context(|| format!("reading {}", spans.display()))?
                .iter()
                .map(spans_to_labels)
                .collect::<gedtag::Result<Vec<_>>>()
                .with_context(|| format!("converting {}", spans.display()))?;
            emit(out.as_deref(), &format_tsv(&sentences)?)
        }
        Command::Align { source, corrected, out } => {
            let aligned = align_files(&source, &corrected)?;
            emit(out.as_deref(), &format_tsv(&aligned)?)
        }
        Command::Vocab { corpora, min_count, out } => {
            let corpus = read_corpora(&corpora)?;
            let vocab = build_vocab(&corpus, min_count)?;
            vocab.save(&out)?;
            log::info!("{} entries written to {}", vocab.len(), out.display());
            Ok(())
        }
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Predict {
            model,
            input,
            text,
            threshold,
        } => {
            let model = load_model(&model)?;
            let sentences = match (input, text) {
                (Some(path), _) => read_token_lines(&path).with_context(|| format!("reading {}", path.display()))?,
                (None, Some(text)) => vec![tokenize(&text)],
                (None, None) => unreachable!("clap requires one of --input and --text"),
            };
            let mut out = String::new();
            for tokens in sentences.iter().filter(|t| !t.is_empty()) {
                let p = predict(&model, tokens, threshold)?;
                for ((tok, prob), label) in tokens.iter().zip(&p.probs_incorrect).zip(&p.labels) {
                    let symbol = if *label == 1 { 'i' } else { 'c' };
                    out.push_str(&format!("{tok}\t{symbol}\t{prob}\n"));
                }
                out.push('\n');
            }
            emit(None, &out)
        }
        Command::Score {
            model,
            essays,
            dir,
            split,
            out,
        } => {
            let model = load_model(&model)?;
            let mut records = read_essays(&essays, &dir).with_context(|| format!("reading {}", essays.display()))?;
            extract_features(&model, &mut records)?;
            let split = split.unwrap_or_else(|| default_split(records.len()));
            let report = fit_and_correlate(&records, split)?;
            println!(
                "essays {} (fit on {split}, evaluated on {})\nslope {:.4} intercept {:.4}\npearson {:.4}\nspearman {:.4}",
                records.len(),
                records.len() - split,
                report.slope,
                report.intercept,
                report.pearson,
                report.spearman
            );
            if let Some(path) = out {
                fs::write(&path, scores_csv(&report.scored))?;
            }
            Ok(())
        }
        Command::Synth {
            sentences,
            seed,
            error_rate,
            rules,
            long_range,
            out,
        } => {
            if sentences == 0 {
                bail!(Usage("--sentences must be at least 1".into()));
            }
            let corpus: Vec<LabeledSentence> = if long_range {
                long_range_task(sentences, seed).into_iter().map(|s| s.sentence).collect()
            } else {
                let cfg = if rules.is_empty() {
                    SynthConfig::with_error_rate(error_rate)
                } else {
                    SynthConfig {
                        rules,
                        ..SynthConfig::default()
                    }
                };
                labeled(&generate(&default_templates(), &cfg, sentences, seed)?)
            };
            emit(out.as_deref(), &format_tsv(&corpus)?)
        }
        Command::Serve(args) => {
            let mut cfg = match &args.config {
                Some(path) => ServeConfig::load(path)?,
                None => ServeConfig::default(),
            };
            if let Some(c) = args.checkpoint {
                cfg.checkpoint = c;
            }
            if let Some(h) = args.host {
                cfg.host = h;
            }
            if let Some(p) = args.port {
                cfg.port = p;
            }
            if let Some(m) = args.max_length {
                cfg.max_length = m;
            }
            if cfg.max_length == 0 {
                bail!(Usage("--max-length must be positive".into()));
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(&cfg))
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_corpora(paths: &[PathBuf]) -> Result<Vec<LabeledSentence>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_corpus(p)?);
    }
    Ok(all)
}

fn read_corpus(path: &Path) -> Result<Vec<LabeledSentence>> {
    read_tsv(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    checkpoint::load_file(path).with_context(|| format!("loading {}", path.display()))
}

fn align_files(source: &Path, corrected: &Path) -> Result<Vec<LabeledSentence>> {
    let src = read_lines_keep_empty(source)?;
    let cor = read_lines_keep_empty(corrected)?;
    if src.len() != cor.len() {
        return Err(gedtag::Error::Data(format!(
            "{} has {} lines but {} has {}",
            source.display(),
            src.len(),
            corrected.display(),
            cor.len()
        ))
        .into());
    }
    src.iter()
        .zip(&cor)
        .enumerate()
        .map(|(i, (s, c))| {
            align_correction(s, c).map_err(|e| {
                anyhow::Error::new(gedtag::Error::Data(format!("{}:{}: {e}", source.display(), i + 1)))
            })
        })
        .collect()
}

/// Token lines where an empty corrected line (everything deleted) still
/// counts; a trailing newline does not add a line.
fn read_lines_keep_empty(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

fn model_config(args: &TrainArgs) -> Result<ModelConfig> {
    let mut cfg = match &args.model_config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).map_err(|e| gedtag::Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ModelConfig::default(),
    };
    if let Some(a) = &args.arch {
        cfg.architecture = a.clone();
    }
    let dims = [
        (&mut cfg.embedding_dim, args.embedding_dim),
        (&mut cfg.conv_window, args.conv_window),
        (&mut cfg.conv_output_dim, args.conv_output_dim),
        (&mut cfg.recurrent_dim, args.recurrent_dim),
        (&mut cfg.pre_output_dim, args.pre_output_dim),
    ];
    for (slot, value) in dims {
        if let Some(v) = value {
            *slot = v;
        }
    }
    match args.peephole.as_deref() {
        Some("full") => cfg.peephole = Peephole::Full,
        Some(_) => cfg.peephole = Peephole::Diagonal,
        None => {}
    }
    match args.elman_activation.as_deref() {
        Some("tanh") => cfg.elman_activation = Activation::Tanh,
        Some(_) => cfg.elman_activation = Activation::Sigmoid,
        None => {}
    }
    Ok(cfg)
}

fn train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.patience {
        cfg.patience = v;
    }
    if let Some(v) = args.threshold {
        cfg.threshold = v;
    }
    if args.clip_norm.is_some() {
        cfg.clip_norm = args.clip_norm;
    }
    cfg.freeze_embeddings |= args.freeze_embeddings;
    cfg.validate()?;
    Ok(cfg)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let model_cfg = model_config(&args)?;
    let train_cfg = train_config(&args)?;
    let dev = read_corpus(&args.dev)?;
    let test = args.test.as_deref().map(read_corpus).transpose()?;
    let corpora = args.corpora.iter().map(|p| read_corpus(p)).collect::<Result<Vec<_>>>()?;
    let fixed_vocab = args.vocab.as_deref().map(Vocabulary::load).transpose()?;

    let stages: Vec<usize> = if args.incremental {
        (1..=corpora.len()).collect()
    } else {
        vec![corpora.len()]
    };
    if args.incremental {
        let header = if test.is_some() {
            "stage,added,sentences,tokens,best_epoch,dev_F05,test_F05"
        } else {
            "stage,added,sentences,tokens,best_epoch,dev_F05"
        };
        println!("{header}");
    }
    for &k in &stages {
        let corpus: Vec<LabeledSentence> = corpora[..k].iter().flatten().cloned().collect();
        let overlap = overlap_count(&corpus, &dev);
        if overlap > 0 {
            log::warn!("{overlap} development sentences also occur in the training data");
        }
        let vocab = match &fixed_vocab {
            Some(v) => v.clone(),
            None => build_vocab(&corpus, args.min_count)?,
        };
        let mut model = Model::new(model_cfg.clone(), vocab, train_cfg.seed)?;
        if let Some(path) = &args.pretrained {
            let vocab = model.vocab().clone();
            let table = model
                .params_mut()
                .get_mut(EMBEDDING)
                .expect("every model has an embedding table");
            let cov = load_pretrained(path, &vocab, table)?;
            log::info!(
                "pretrained vectors for {} of {} vocabulary entries ({:.1}%)",
                cov.found,
                cov.vocab_size,
                100.0 * cov.fraction()
            );
        }
        let tokens: usize = corpus.iter().map(LabeledSentence::len).sum();
        log::info!(
            "stage {k}: {} sentences, {tokens} tokens, {} architecture",
            corpus.len(),
            model_cfg.architecture
        );
        let outcome = train(model, &corpus, &dev, &train_cfg)?;
        let best = outcome.best_epoch.unwrap_or(0);
        let dev_f = outcome
            .history
            .get(best.wrapping_sub(1))
            .map_or_else(|| evaluate(&outcome.model, &dev, train_cfg.threshold).map(|c| c.f05()), |r| Ok(r.dev_f05()))?;
        if args.incremental {
            let added = args.corpora[k - 1].display();
            let mut line = format!("{k},{added},{},{tokens},{best},{dev_f:.1}", corpus.len());
            if let Some(test) = &test {
                let f = evaluate(&outcome.model, test, train_cfg.threshold)?.f05();
                line.push_str(&format!(",{f:.1}"));
            }
            println!("{line}");
        } else {
            println!("best epoch {best}: dev F0.5 {dev_f:.1}");
            if let Some(test) = &test {
                let c = evaluate(&outcome.model, test, train_cfg.threshold)?;
                print!("{}", format_table(&[ReportRow::new("test", c)]));
            }
        }
        if k == corpora.len() {
            checkpoint::save_file(&outcome.model, &args.out)?;
            if let Some(path) = &args.history {
                fs::write(path, history_csv(&outcome.history))?;
            }
        }
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let gold = read_corpus(&args.gold)?;
    let mut rows = Vec::new();
    match (&args.source, &args.corrected) {
        (Some(source), Some(corrected)) => {
            let system = align_files(source, corrected)?;
            let name = corrected.file_stem().map_or("system".into(), |s| s.to_string_lossy().into_owned());
            rows.push(ReportRow::new(name, detection_eval(&system, &gold)?));
        }
        _ => {
            for path in &args.systems {
                let system = read_corpus(path)?;
                let counts = detection_eval(&system, &gold).with_context(|| format!("evaluating {}", path.display()))?;
                let name = path.file_stem().map_or("system".into(), |s| s.to_string_lossy().into_owned());
                rows.push(ReportRow::new(name, counts));
            }
        }
    }
    let text = if args.csv { format_csv(&rows) } else { format_table(&rows) };
    emit(None, &text)
}
