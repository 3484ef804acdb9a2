use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedCoverage {
    /// Vocabulary rows overwritten from the file.
    pub found: usize,
    pub vocab_size: usize,
    /// Tokens that appeared on more than one line; the last line wins.
    pub duplicates: Vec<String>,
}

impl PretrainedCoverage {
    pub fn fraction(&self) -> f64 {
        self.found as f64 / self.vocab_size as f64
    }
}

/// Copies vectors from a plain-text embedding file into the rows of
/// `embedding` whose token appears in the file. Lines are `token v1 .. vd`;
/// an optional first line `count dim` is accepted. Tokens are matched
/// exactly against the (lowercased) vocabulary entries.
pub fn load_pretrained(
    path: &Path,
    vocab: &Vocabulary,
    embedding: &mut Tensor,
) -> Result<PretrainedCoverage> {
    let dim = embedding.shape()[1];
    if embedding.shape()[0] != vocab.len() {
        return Err(Error::Config(format!(
            "embedding has {} rows but vocabulary has {} entries",
            embedding.shape()[0],
            vocab.len()
        )));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut duplicates = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            let header_dim: usize = fields[1].parse().unwrap_or(0);
            if header_dim != dim {
                return Err(Error::Config(format!(
                    "embedding file has dimension {header_dim}, model expects {dim}"
                )));
            }
            continue;
        }
        let (token, values) = fields
            .split_first()
            .ok_or_else(|| Error::parse(path, i + 1, "empty line"))?;
        if values.len() != dim {
            // the first vector line fixes the file's dimension
            if seen.is_empty() {
                return Err(Error::Config(format!(
                    "embedding file has dimension {}, model expects {dim}",
                    values.len()
                )));
            }
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        let parsed = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, i + 1, format!("bad value: {e}")))?;
        let count = seen.entry(token.to_string()).or_default();
        *count += 1;
        if *count == 2 {
            warn!("{}: duplicate embedding for {token:?}; last one wins", path.display());
            duplicates.push(token.to_string());
        }
        if let Some(id) = exact_id(vocab, token) {
            rows.insert(id, parsed);
        }
    }

    let found = rows.len();
    for (id, values) in rows {
        embedding.row_mut(id).copy_from_slice(&values);
    }
    Ok(PretrainedCoverage {
        found,
        vocab_size: vocab.len(),
        duplicates,
    })
}

fn exact_id(vocab: &Vocabulary, token: &str) -> Option<usize> {
    let id = vocab.id(token);
    (vocab.token(id) == Some(token)).then_some(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocab, words, LabeledSentence};
    use std::fs;

    fn setup(contents: &str) -> (tempfile::TempDir, std::path::PathBuf, Vocabulary, Tensor) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, contents).unwrap();
        let vocab = build_vocab(&[LabeledSentence::clean(words("a b c"))], 1).unwrap();
        let emb = Tensor::new(vec![vocab.len(), 3], vec![9.0; vocab.len() * 3]).unwrap();
        (dir, path, vocab, emb)
    }

    #[test]
    fn single_row_copied() {
        let (_d, path, vocab, mut emb) = setup("a 0.1 0.2 0.3\n");
        let cov = load_pretrained(&path, &vocab, &mut emb).unwrap();
        assert_eq!(cov.found, 1);
        assert!((cov.fraction() - 1.0 / vocab.len() as f64).abs() < 1e-15);
        assert_eq!(emb.row(vocab.id("a")), &[0.1, 0.2, 0.3]);
        assert_eq!(emb.row(vocab.id("b")), &[9.0, 9.0, 9.0]);
    }

    #[test]
    fn header_and_no_overlap() {
        let (_d, path, vocab, mut emb) = setup("2 3\nzz 1 2 3\nyy 4 5 6\n");
        let before = emb.clone();
        let cov = load_pretrained(&path, &vocab, &mut emb).unwrap();
        assert_eq!(cov.found, 0);
        assert_eq!(cov.fraction(), 0.0);
        assert_eq!(emb, before);
    }

    #[test]
    fn duplicate_last_wins() {
        let (_d, path, vocab, mut emb) = setup("b 1 1 1\nb 2 2 2\n");
        let cov = load_pretrained(&path, &vocab, &mut emb).unwrap();
        assert_eq!(cov.duplicates, vec!["b".to_string()]);
        assert_eq!(emb.row(vocab.id("b")), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let (_d, path, vocab, mut emb) = setup("a 0.1 0.2\n");
        assert!(matches!(load_pretrained(&path, &vocab, &mut emb), Err(Error::Config(_))));
        let (_d, path, vocab, mut emb) = setup("5 4\na 1 2 3 4\n");
        assert!(matches!(load_pretrained(&path, &vocab, &mut emb), Err(Error::Config(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let (_d, path, vocab, mut emb) = setup("a 1 2 3\nb 1 x 3\n");
        assert!(matches!(
            load_pretrained(&path, &vocab, &mut emb),
            Err(Error::Parse { line: 2, .. })
        ));
        let (_d, path, vocab, mut emb) = setup("a 1 2 3\nb 1 2\n");
        assert!(matches!(
            load_pretrained(&path, &vocab, &mut emb),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
