//! Synthetic learner-error corpora.
//!
//! Sentences are sampled from a small agreement-aware grammar and then
//! corrupted token by token. Every corruption is recorded as an error span in
//! the output sentence, using the same conventions as annotated corpora: a
//! deleted word is a zero-length span labeling the following token.

pub mod lexicon;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{spans_to_labels, LabeledSentence, SpanAnnotation, INCORRECT};
use crate::error::{Error, Result};
use lexicon::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Drop a determiner or preposition.
    DeleteFunctionWord,
    /// Use the other agreement form of a finite verb.
    SwapAgreement,
    /// Replace a word with its confusable counterpart (a/an, their/there).
    SubstituteConfusable,
    /// Insert a superfluous function word.
    InsertSpurious,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] = [
        ErrorKind::DeleteFunctionWord,
        ErrorKind::SwapAgreement,
        ErrorKind::SubstituteConfusable,
        ErrorKind::InsertSpurious,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRule {
    pub kind: ErrorKind,
    /// Per-position probability of this corruption.
    pub rate: f64,
}

/// The four rules sharing `total` equally.
pub fn uniform_rules(total: f64) -> Vec<ErrorRule> {
    ErrorKind::ALL
        .iter()
        .map(|&kind| ErrorRule {
            kind,
            rate: total / 4.0,
        })
        .collect()
}

fn validate_rules(rules: &[ErrorRule]) -> Result<f64> {
    if let Some(r) = rules.iter().find(|r| !(0.0..=1.0).contains(&r.rate)) {
        return Err(Error::Config(format!("rate {} of {:?} outside [0, 1]", r.rate, r.kind)));
    }
    let total: f64 = rules.iter().map(|r| r.rate).sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::Config(format!("error rates sum to {total} > 1")));
    }
    Ok(total)
}

/// One slot of a sentence template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Noun phrase carrying the sentence's agreement number.
    Subject,
    /// Personal pronoun carrying the sentence's agreement number.
    Pronoun,
    /// Noun phrase with independent number.
    Object,
    /// Noun phrase with the sentence's agreement number (after "there is").
    AgreeingObject,
    IntransitiveVerb,
    TransitiveVerb,
    Be,
    There,
    Prep,
    Adverb,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template(pub Vec<Slot>);

pub fn default_templates() -> Vec<Template> {
    use Slot::*;
    [
        vec![Subject, IntransitiveVerb, Adverb, Stop],
        vec![Subject, TransitiveVerb, Object, Stop],
        vec![Subject, TransitiveVerb, Object, Prep, Object, Stop],
        vec![Pronoun, TransitiveVerb, Object, Stop],
        vec![Subject, IntransitiveVerb, Prep, Object, Stop],
        vec![Pronoun, IntransitiveVerb, Prep, Object, Adverb, Stop],
        vec![There, Be, AgreeingObject, Prep, Object, Stop],
        vec![Subject, Be, Prep, Object, Stop],
    ]
    .into_iter()
    .map(Template)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagged {
    pub text: String,
    pub pos: Pos,
}

fn tag(text: &str, pos: Pos) -> Tagged {
    Tagged {
        text: text.to_string(),
        pos,
    }
}

/// Generator settings besides the templates.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub rules: Vec<ErrorRule>,
    /// Chance that an object noun is replaced by a made-up word that will
    /// almost surely be out of vocabulary.
    pub rare_word_rate: f64,
    pub adjective_rate: f64,
}

impl SynthConfig {
    pub fn with_error_rate(total: f64) -> Self {
        SynthConfig {
            rules: uniform_rules(total),
            ..SynthConfig::default()
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rules: uniform_rules(0.15),
            rare_word_rate: 0.02,
            adjective_rate: 0.3,
        }
    }
}

/// A generated sentence and its corrupted counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSentence {
    pub clean: Vec<String>,
    pub corrupted: LabeledSentence,
    /// Error spans over `corrupted.tokens`, one per corruption.
    pub spans: Vec<(usize, usize)>,
    pub edits: Vec<ErrorKind>,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("nonempty word list")
}

fn rare_word(rng: &mut ChaCha8Rng) -> String {
    const SYL: &[&str] = &["ka", "zu", "mo", "ri", "te", "vo", "ga", "pi", "shu", "len", "dar", "qu"];
    let n = rng.gen_range(3..=4);
    (0..n).map(|_| *pick(rng, SYL)).collect()
}

fn noun_phrase(rng: &mut ChaCha8Rng, number: Number, cfg: &SynthConfig, allow_rare: bool) -> Vec<Tagged> {
    if allow_rare && rng.gen_bool(cfg.rare_word_rate) {
        return vec![tag("the", Pos::Det), tag(&rare_word(rng), Pos::Noun)];
    }
    let noun = match number {
        Number::Singular => pick(rng, NOUNS).0,
        Number::Plural => pick(rng, NOUNS).1,
    };
    let adj = rng.gen_bool(cfg.adjective_rate).then(|| *pick(rng, ADJECTIVES));
    let next = adj.unwrap_or(noun);
    let det = match number {
        Number::Singular => match *pick(rng, SINGULAR_DETS) {
            "a" => indefinite(next),
            d => d,
        },
        Number::Plural => *pick(rng, PLURAL_DETS),
    };
    let mut np = vec![tag(det, Pos::Det)];
    if let Some(a) = adj {
        np.push(tag(a, Pos::Adj));
    }
    np.push(tag(noun, Pos::Noun));
    np
}

/// Determiner and noun that both show the number.
fn marked_subject(rng: &mut ChaCha8Rng, number: Number) -> Vec<Tagged> {
    let pair = pick(rng, NOUNS);
    let noun = number_form(pair, number);
    let det = match number {
        Number::Singular => match *pick(rng, MARKED_SINGULAR_DETS) {
            "a" => indefinite(noun),
            d => d,
        },
        Number::Plural => *pick(rng, MARKED_PLURAL_DETS),
    };
    vec![tag(det, Pos::Det), tag(noun, Pos::Noun)]
}

fn number_form(pair: &(&'static str, &'static str), n: Number) -> &'static str {
    match n {
        Number::Singular => pair.0,
        Number::Plural => pair.1,
    }
}

fn random_number(rng: &mut ChaCha8Rng) -> Number {
    if rng.gen_bool(0.5) {
        Number::Singular
    } else {
        Number::Plural
    }
}

/// Samples one grammatical sentence from a template.
pub fn realize(template: &Template, rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Vec<Tagged> {
    let number = random_number(rng);
    let mut out = Vec::new();
    for slot in &template.0 {
        match slot {
            Slot::Subject => out.extend(noun_phrase(rng, number, cfg, false)),
            Slot::AgreeingObject => out.extend(noun_phrase(rng, number, cfg, false)),
            Slot::Object => {
                let n = random_number(rng);
                out.extend(noun_phrase(rng, n, cfg, true));
            }
            Slot::Pronoun => {
                let list = match number {
                    Number::Singular => SINGULAR_PRONOUNS,
                    Number::Plural => PLURAL_PRONOUNS,
                };
                out.push(tag(pick(rng, list), Pos::Pron));
            }
            Slot::IntransitiveVerb => out.push(tag(number_form(pick(rng, INTRANSITIVE), number), Pos::Verb)),
            Slot::TransitiveVerb => out.push(tag(number_form(pick(rng, TRANSITIVE), number), Pos::Verb)),
            Slot::Be => out.push(tag(number_form(pick(rng, BE), number), Pos::Verb)),
            Slot::There => out.push(tag("there", Pos::Expletive)),
            Slot::Prep => out.push(tag(pick(rng, PREPOSITIONS), Pos::Prep)),
            Slot::Adverb => out.push(tag(pick(rng, ADVERBS), Pos::Adv)),
            Slot::Stop => out.push(tag(".", Pos::Punct)),
        }
    }
    out
}

fn confusable(word: &str) -> Option<&'static str> {
    CONFUSABLES.iter().find(|(a, _)| *a == word).map(|(_, b)| *b)
}

fn applicable(kind: ErrorKind, tokens: &[Tagged], i: usize) -> bool {
    let t = &tokens[i];
    match kind {
        ErrorKind::DeleteFunctionWord => {
            matches!(t.pos, Pos::Det | Pos::Prep) && i + 1 < tokens.len()
        }
        ErrorKind::SwapAgreement => t.pos == Pos::Verb && Lexicon::get().is_verb(&t.text),
        ErrorKind::SubstituteConfusable => confusable(&t.text).is_some(),
        ErrorKind::InsertSpurious => true,
    }
}

/// Applies the rules to a tagged sentence.
///
/// Each position is selected for corruption with probability equal to the
/// summed rule rates; the rule is then drawn among those applicable at that
/// position, in proportion to their rates. A selection that cannot be served
/// (no applicable rule, or the token directly after a deletion, which already
/// carries that deletion's label) moves to the next position, so every
/// corruption owns exactly one labeled token.
pub fn corrupt(tokens: &[Tagged], rules: &[ErrorRule], rng: &mut ChaCha8Rng) -> Result<SynthSentence> {
    let total = validate_rules(rules)?;
    let lex = Lexicon::get();
    let mut out: Vec<String> = Vec::with_capacity(tokens.len() + 2);
    let mut spans = Vec::new();
    let mut edits = Vec::new();
    let mut pending = false;
    let mut blocked = false;
    for i in 0..tokens.len() {
        let selected = pending || (total > 0.0 && rng.gen::<f64>() < total);
        let candidates: Vec<&ErrorRule> = rules
            .iter()
            .filter(|r| r.rate > 0.0 && applicable(r.kind, tokens, i))
            .collect();
        if !selected || blocked || candidates.is_empty() {
            pending = selected;
            blocked = false;
            out.push(tokens[i].text.clone());
            continue;
        }
        pending = false;
        let weight: f64 = candidates.iter().map(|r| r.rate).sum();
        let mut u = rng.gen::<f64>() * weight;
        let mut kind = candidates[candidates.len() - 1].kind;
        for r in &candidates {
            if u < r.rate {
                kind = r.kind;
                break;
            }
            u -= r.rate;
        }
        let k = out.len();
        let text = &tokens[i].text;
        match kind {
            ErrorKind::DeleteFunctionWord => {
                spans.push((k, k));
                blocked = true;
            }
            ErrorKind::SwapAgreement => {
                out.push(lex.other_verb_form(text).expect("verb").to_string());
                spans.push((k, k + 1));
            }
            ErrorKind::SubstituteConfusable => {
                out.push(confusable(text).expect("confusable").to_string());
                spans.push((k, k + 1));
            }
            ErrorKind::InsertSpurious => {
                out.push(pick(rng, SPURIOUS).to_string());
                out.push(text.clone());
                spans.push((k, k + 1));
            }
        }
        edits.push(kind);
    }
    let mut labels = vec![0u8; out.len()];
    for &(s, _) in &spans {
        labels[s] = INCORRECT;
    }
    Ok(SynthSentence {
        clean: tokens.iter().map(|t| t.text.clone()).collect(),
        corrupted: LabeledSentence::new(out, labels)?,
        spans,
        edits,
    })
}

fn sentence_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `n` sentences; sentence `k` depends only on `(seed, k)`.
pub fn generate(
    templates: &[Template],
    cfg: &SynthConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<SynthSentence>> {
    if templates.is_empty() || templates.iter().any(|t| t.0.is_empty()) {
        return Err(Error::Config("templates must be nonempty".into()));
    }
    validate_rules(&cfg.rules)?;
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = sentence_rng(seed, k);
            let t = pick(&mut rng, templates);
            let tokens = realize(t, &mut rng, cfg);
            corrupt(&tokens, &cfg.rules, &mut rng)
        })
        .collect()
}

/// Corrupted sentences with their labels.
pub fn labeled(corpus: &[SynthSentence]) -> Vec<LabeledSentence> {
    corpus.iter().map(|s| s.corrupted.clone()).collect()
}

/// Labels recomputed from the recorded spans.
pub fn labels_from_spans(s: &SynthSentence) -> Result<LabeledSentence> {
    spans_to_labels(&SpanAnnotation {
        tokens: s.corrupted.tokens.clone(),
        spans: s.spans.clone(),
    })
}

/// Corruptions per clean token.
pub fn corruption_rate(corpus: &[SynthSentence]) -> f64 {
    let edits: usize = corpus.iter().map(|s| s.edits.len()).sum();
    let tokens: usize = corpus.iter().map(|s| s.clean.len()).sum();
    if tokens == 0 {
        0.0
    } else {
        edits as f64 / tokens as f64
    }
}

/// Probability that a long-range sentence carries an agreement error.
pub const MISMATCH_RATE: f64 = 0.35;

/// Minimum distance between subject noun and verb in the long-range task.
pub const MIN_DEPENDENCY_DISTANCE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct LongRangeSentence {
    pub sentence: LabeledSentence,
    /// Index of the subject's head noun.
    pub subject: usize,
    pub verb: usize,
}

/// Subject-verb agreement across a chain of prepositional phrases. The
/// intervening nouns and determiners are number-neutral ("the sheep"), so
/// the verb's correctness is decided only by the subject noun at least
/// [`MIN_DEPENDENCY_DISTANCE`] tokens earlier.
pub fn long_range_task(n: usize, seed: u64) -> Vec<LongRangeSentence> {
    let cfg = SynthConfig {
        rare_word_rate: 0.0,
        ..SynthConfig::default()
    };
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = sentence_rng(seed, k);
            let number = random_number(&mut rng);
            let mut toks = marked_subject(&mut rng, number);
            let subject = toks.len() - 1;
            while toks.len() - subject < MIN_DEPENDENCY_DISTANCE {
                // a phrase is 3 tokens, or 4 with an adjective; forcing the
                // adjective when exactly 4 are missing keeps the distance at
                // MIN_DEPENDENCY_DISTANCE or one more
                let missing = MIN_DEPENDENCY_DISTANCE - (toks.len() - subject);
                toks.push(tag(pick(&mut rng, PREPOSITIONS), Pos::Prep));
                toks.push(tag(pick(&mut rng, NEUTRAL_DETS), Pos::Det));
                if missing == 4 || rng.gen_bool(cfg.adjective_rate) {
                    toks.push(tag(pick(&mut rng, ADJECTIVES), Pos::Adj));
                }
                toks.push(tag(pick(&mut rng, NEUTRAL_NOUNS), Pos::Noun));
            }
            let verb = toks.len();
            let mismatch = rng.gen_bool(MISMATCH_RATE);
            let form = if mismatch { number.flip() } else { number };
            let transitive = rng.gen_bool(0.5);
            let pair = if transitive {
                pick(&mut rng, TRANSITIVE)
            } else {
                pick(&mut rng, INTRANSITIVE)
            };
            toks.push(tag(number_form(pair, form), Pos::Verb));
            if transitive {
                let n = random_number(&mut rng);
                toks.extend(noun_phrase(&mut rng, n, &cfg, false));
            } else {
                toks.push(tag(pick(&mut rng, ADVERBS), Pos::Adv));
            }
            toks.push(tag(".", Pos::Punct));
            let mut labels = vec![0u8; toks.len()];
            if mismatch {
                labels[verb] = INCORRECT;
            }
            let tokens = toks.into_iter().map(|t| t.text).collect();
            LongRangeSentence {
                sentence: LabeledSentence { tokens, labels },
                subject,
                verb,
            }
        })
        .collect()
}
