//! One token per line as `token<TAB>label` with label `c` (correct) or `i`
//! (incorrect); sentences are separated by blank lines. CRLF input is
//! accepted, LF is always written.

use std::fs;
use std::path::Path;

use super::{LabeledSentence, CORRECT, INCORRECT};
use crate::error::{Error, Result};

pub fn parse_tsv(text: &str, path: &Path) -> Result<Vec<LabeledSentence>> {
    let mut out = Vec::new();
    let mut current = LabeledSentence::clean(Vec::new());
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            if !current.is_empty() {
                out.push(std::mem::replace(&mut current, LabeledSentence::clean(Vec::new())));
            }
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(token), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(path, i + 1, "expected token<TAB>label"));
        };
        if token.is_empty() {
            return Err(Error::parse(path, i + 1, "empty token"));
        }
        let label = match label {
            "c" => CORRECT,
            "i" => INCORRECT,
            other => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("label must be c or i, found {other:?}"),
                ))
            }
        };
        current.tokens.push(token.to_string());
        current.labels.push(label);
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

pub fn read_tsv(path: &Path) -> Result<Vec<LabeledSentence>> {
    let text = fs::read_to_string(path)?;
    parse_tsv(&text, path)
}

pub fn format_tsv(sentences: &[LabeledSentence]) -> Result<String> {
    let mut out = String::new();
    for s in sentences {
        if s.is_empty() {
            return Err(Error::Data("cannot write an empty sentence".into()));
        }
        for (token, &label) in s.tokens.iter().zip(&s.labels) {
            if token.is_empty() || token.contains(['\t', '\n', '\r']) {
                return Err(Error::Data(format!("token {token:?} cannot be written as TSV")));
            }
            out.push_str(token);
            out.push('\t');
            out.push(if label == INCORRECT { 'i' } else { 'c' });
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_tsv(path: &Path, sentences: &[LabeledSentence]) -> Result<()> {
    fs::write(path, format_tsv(sentences)?)?;
    Ok(())
}
