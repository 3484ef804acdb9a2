use std::fs;
use std::path::Path;

use super::{LabeledSentence, INCORRECT};
use crate::error::{Error, Result};

/// Tokens plus annotated error spans as half-open token ranges. A span with
/// `start == end` marks a missing word before token `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanAnnotation {
    pub tokens: Vec<String>,
    pub spans: Vec<(usize, usize)>,
}

/// Marks every token inside a span as incorrect. A zero-length span labels
/// the token right after the gap, or the last token when the gap is at the
/// end of the sentence.
pub fn spans_to_labels(a: &SpanAnnotation) -> Result<LabeledSentence> {
    let len = a.tokens.len();
    let mut sentence = LabeledSentence::clean(a.tokens.clone());
    for &(start, end) in &a.spans {
        if start > end || end > len {
            return Err(Error::Annotation { start, end, len });
        }
        if start == end {
            if len == 0 {
                return Err(Error::Annotation { start, end, len });
            }
            sentence.labels[start.min(len - 1)] = INCORRECT;
        } else {
            sentence.labels[start..end].fill(INCORRECT);
        }
    }
    Ok(sentence)
}

/// Reads span annotations, one sentence per line:
/// `tok tok tok<TAB>start-end start-end`. The span field may be empty.
pub fn read_span_file(path: &Path) -> Result<Vec<SpanAnnotation>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (toks, spans) = line.split_once('\t').unwrap_or((line, ""));
        let tokens: Vec<String> = toks.split_whitespace().map(str::to_string).collect();
        let mut parsed = Vec::new();
        for field in spans.split_whitespace() {
            let (s, e) = field
                .split_once('-')
                .ok_or_else(|| Error::parse(path, i + 1, format!("bad span {field:?}")))?;
            let s = s
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad span start {s:?}")))?;
            let e = e
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad span end {e:?}")))?;
            parsed.push((s, e));
        }
        out.push(SpanAnnotation {
            tokens,
            spans: parsed,
        });
    }
    Ok(out)
}
